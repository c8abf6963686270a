//! `rbm`: run random batch simulations, convergence studies, timings and the
//! graph clustering / reordering tool from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rbm::diagnostics::reorder_permutation;
use rbm::harness::{
    build_model, convergence_study, run_experiment, timing_benchmark, verify_lemma, write_convergence,
    write_slopes, write_timing, ExperimentSummary,
};
use rbm::integrators::SchemeKind;
use rbm::plan::SimPlan;

#[derive(Parser, Debug)]
#[command(name = "rbm", version, about = "Random batch methods for interacting particle systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write its metrics and snapshots.
    Run(PlanArgs),
    /// Measure the error against a fully coupled reference over a grid of step sizes.
    Converge {
        #[command(flatten)]
        plan: PlanArgs,
        /// Particle counts (comma separated; default: the plan's n).
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
        /// Step sizes (comma separated).
        #[arg(long, value_delimiter = ',', default_values_t = [0.0625, 0.03125, 0.015625, 0.0078125])]
        taus: Vec<f64>,
        /// Step of the fully coupled reference; must divide every step size.
        #[arg(long, default_value_t = 2f64.powi(-12))]
        reference_tau: f64,
        /// Batch replicas averaged (root mean square) per cell.
        #[arg(long, default_value_t = 1)]
        replicas: usize,
    },
    /// Time steps of several schemes at several particle counts.
    Bench {
        #[command(flatten)]
        plan: PlanArgs,
        /// Particle counts (comma separated; default: the plan's n).
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
        /// Schemes to time (comma separated).
        #[arg(long, value_delimiter = ',', default_values_t = [SchemeKind::Rbm1, SchemeKind::Full])]
        schemes: Vec<SchemeKind>,
        /// Timed steps per repeat.
        #[arg(long, default_value_t = 10)]
        steps: u64,
        /// Repeats; the fastest is reported.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Cluster the nodes of a graph and write one label per node.
    Cluster(PlanArgs),
    /// Compute a bandwidth-reducing node ordering of a graph.
    Reorder(PlanArgs),
    /// Check the batch statistic's mean and variance by exhaustive enumeration.
    VerifyLemma {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        p: usize,
        /// Random position sets to check.
        #[arg(long, default_value_t = 50)]
        sets: usize,
        #[arg(long, env = "RBM_SEED", default_value_t = 0)]
        seed: u64,
    },
}

/// Plan keys. Unset flags keep the value from `--config`, or else the model's
/// default.
#[derive(Args, Debug, Default)]
struct PlanArgs {
    /// `key = value` plan file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// test1d, hamiltonian1d, dyson, thomson, wealth, opinion or cluster.
    #[arg(long)]
    model: Option<String>,
    /// rbm1, rbm_r, rbm_r_prime or full [default: per model].
    #[arg(long)]
    scheme: Option<String>,
    /// euler, euler_maruyama, split_exact or verlet [default: per model].
    #[arg(long)]
    intra: Option<String>,
    /// Particle count [default: per model].
    #[arg(long)]
    n: Option<String>,
    /// Batch size [default: 2].
    #[arg(long)]
    p: Option<String>,
    /// Step size [default: per model].
    #[arg(long)]
    tau: Option<String>,
    /// Final time [default: per model].
    #[arg(long)]
    t_end: Option<String>,
    /// Master seed [default: $RBM_SEED, else 0].
    #[arg(long)]
    seed: Option<String>,
    /// Histogram times, comma separated [default: per model].
    #[arg(long)]
    snapshots: Option<String>,
    /// Interval between metric rows; 0 records start and end only [default: per model].
    #[arg(long)]
    record_every: Option<String>,
    /// Worker threads; 1 replays bit for bit [default: 1].
    #[arg(long)]
    threads: Option<String>,
    /// Batch sampler: uniform or edges [default: uniform].
    #[arg(long)]
    sampler: Option<String>,
    /// Block sizes of the generated graph, comma separated [default: 50,100,150].
    #[arg(long)]
    sizes: Option<String>,
    /// Within-block edge probability [default: 0.7].
    #[arg(long)]
    p_in: Option<String>,
    /// Between-block edge probability [default: 0.3].
    #[arg(long)]
    q_out: Option<String>,
    /// Matrix Market graph used instead of a generated one.
    #[arg(long)]
    matrix: Option<String>,
    /// Output directory; nothing is written without it.
    #[arg(long)]
    out: Option<String>,
    /// Confinement or threshold coefficient [default: per model].
    #[arg(long)]
    beta: Option<String>,
    /// Noise strength [default: per model].
    #[arg(long)]
    sigma: Option<String>,
    /// Exchange rate of the wealth model [default: 1].
    #[arg(long)]
    kappa: Option<String>,
    /// Diffusion of the wealth model [default: 1].
    #[arg(long)]
    diffusion: Option<String>,
    /// Interaction strength [default: per model].
    #[arg(long)]
    alpha: Option<String>,
    /// Noise scaling exponent of the opinion model [default: 1/3].
    #[arg(long)]
    epsilon_exponent: Option<String>,
}

/// A failure tagged with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        msg: e.to_string(),
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        msg: e.to_string(),
    }
}

impl PlanArgs {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("scheme", &self.scheme),
            ("intra", &self.intra),
            ("n", &self.n),
            ("p", &self.p),
            ("tau", &self.tau),
            ("t_end", &self.t_end),
            ("seed", &self.seed),
            ("snapshots", &self.snapshots),
            ("record_every", &self.record_every),
            ("threads", &self.threads),
            ("sampler", &self.sampler),
            ("sizes", &self.sizes),
            ("p_in", &self.p_in),
            ("q_out", &self.q_out),
            ("matrix", &self.matrix),
            ("out", &self.out),
            ("beta", &self.beta),
            ("sigma", &self.sigma),
            ("kappa", &self.kappa),
            ("diffusion", &self.diffusion),
            ("alpha", &self.alpha),
            ("epsilon_exponent", &self.epsilon_exponent),
        ]
    }

    /// Defaults, then the config file, then `RBM_SEED` if no seed was given,
    /// then flags.
    fn plan(&self, forced_model: Option<&str>) -> Result<SimPlan, Failure> {
        let mut config_has_seed = false;
        let mut plan = match (&self.config, forced_model.or(self.model.as_deref())) {
            (Some(path), model) => {
                let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                config_has_seed = rbm::plan::parse_config(&text)
                    .map_err(usage)?
                    .iter()
                    .any(|(_, k, _)| k == "seed");
                match model {
                    Some(m) => {
                        let mut plan = SimPlan::defaults_for(m).map_err(usage)?;
                        plan.apply_config(&text).map_err(usage)?;
                        plan.set("model", m).map_err(usage)?;
                        plan
                    }
                    None => SimPlan::from_config_text(&text).map_err(usage)?,
                }
            }
            (None, Some(m)) => SimPlan::defaults_for(m).map_err(usage)?,
            (None, None) => return Err(usage("--model or --config is required")),
        };
        if self.seed.is_none() && !config_has_seed {
            if let Ok(seed) = std::env::var("RBM_SEED") {
                plan.set("seed", &seed).map_err(usage)?;
            }
        }
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                plan.set(key, v).map_err(usage)?;
            }
        }
        plan.validate().map_err(usage)?;
        build_model(&plan).map_err(usage)?;
        Ok(plan)
    }
}

fn init_threads(plan: &SimPlan) -> Result<(), Failure> {
    if plan.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(plan.threads)
            .build_global()
            .map_err(runtime)?;
    }
    Ok(())
}

fn print_summary(plan: &SimPlan, summary: &ExperimentSummary) {
    println!("model {} n {} steps {} t {}", plan.model, plan.n, summary.steps, summary.final_state.time);
    if let Some(last) = summary.records.last() {
        for (k, v) in &last.metrics {
            println!("{k} {v}");
        }
    }
    if let Some(dir) = &plan.out {
        println!("wrote {}", dir.display());
    }
}

fn run_plan(plan: &SimPlan) -> Result<ExperimentSummary, Failure> {
    init_threads(plan)?;
    // The plan was validated and its model built already, so what fails here
    // is the run itself.
    run_experiment(plan).map_err(runtime)
}

fn write_lines(path: &Path, items: impl Iterator<Item = String>) -> Result<(), Failure> {
    let mut s = String::new();
    for item in items {
        s.push_str(&item);
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let plan = args.plan(None)?;
            let summary = run_plan(&plan)?;
            print_summary(&plan, &summary);
        }
        Command::Converge {
            plan,
            ns,
            taus,
            reference_tau,
            replicas,
        } => {
            let plan = plan.plan(None)?;
            init_threads(&plan)?;
            let ns = if ns.is_empty() { vec![plan.n] } else { ns };
            let reports = convergence_study(&plan, &ns, &taus, reference_tau, replicas).map_err(runtime)?;
            println!("n,tau,error");
            for r in &reports {
                for (t, e) in r.taus.iter().zip(&r.errors) {
                    println!("{},{t},{e}", r.n);
                }
            }
            for r in &reports {
                match r.fitted_slope {
                    Some(s) => println!("slope n={} {s:.4}", r.n),
                    None => println!("slope n={} absent", r.n),
                }
            }
            if let Some(dir) = &plan.out {
                std::fs::create_dir_all(dir).map_err(runtime)?;
                write_convergence(&dir.join("convergence.csv"), &reports).map_err(runtime)?;
                write_slopes(&dir.join("slopes.csv"), &reports).map_err(runtime)?;
            }
        }
        Command::Bench {
            plan,
            ns,
            schemes,
            steps,
            repeats,
        } => {
            let plan = plan.plan(None)?;
            init_threads(&plan)?;
            let ns = if ns.is_empty() { vec![plan.n] } else { ns };
            let rows = timing_benchmark(&plan, &ns, &schemes, steps, repeats).map_err(runtime)?;
            println!("n,scheme,seconds_per_step");
            for r in &rows {
                println!("{},{},{:.6e}", r.n, r.scheme, r.seconds_per_step);
            }
            if let Some(dir) = &plan.out {
                std::fs::create_dir_all(dir).map_err(runtime)?;
                write_timing(&dir.join("timing.csv"), &rows).map_err(runtime)?;
            }
        }
        Command::Cluster(args) => {
            let plan = args.plan(Some("cluster"))?;
            let summary = run_plan(&plan)?;
            let labels = summary.labels.as_ref().expect("cluster runs produce labels");
            println!("clusters {}", labels.cluster_count());
            if let Some(ari) = summary.ari {
                println!("ari {ari}");
            }
            if plan.out.is_none() {
                for l in labels.as_slice() {
                    println!("{l}");
                }
            }
        }
        Command::Reorder(args) => {
            let plan = args.plan(Some("cluster"))?;
            let built = build_model(&plan).map_err(usage)?;
            let summary = run_plan(&plan)?;
            let xs: Vec<f64> = summary.final_state.positions().to_vec();
            let perm = reorder_permutation(&xs);
            let adjacency = built.adjacency.expect("cluster model has a graph");
            let reordered = adjacency.permuted(&perm).map_err(runtime)?;
            println!("bandwidth before {} after {}", adjacency.bandwidth(), reordered.bandwidth());
            match &plan.out {
                Some(dir) => write_lines(&dir.join("permutation.txt"), perm.iter().map(|i| i.to_string()))?,
                None => perm.iter().for_each(|i| println!("{i}")),
            }
        }
        Command::VerifyLemma { n, p, sets, seed } => {
            if p < 2 || n < 3 || n % p != 0 {
                return Err(usage(format!("need n >= 3 and 2 <= p dividing n, got n={n} p={p}")));
            }
            let cases = verify_lemma(n, p, sets, seed).map_err(runtime)?;
            let mut all = true;
            for c in &cases {
                let ok = c.passed();
                all &= ok;
                println!(
                    "{} n={} p={} set={} max|E chi|={:.3e} max var rel err={:.3e}",
                    if ok { "PASS" } else { "FAIL" },
                    c.n,
                    c.p,
                    c.set,
                    c.max_mean,
                    c.max_variance_rel
                );
            }
            println!("{} {} of {} sets", if all { "PASS" } else { "FAIL" }, cases.iter().filter(|c| c.passed()).count(), cases.len());
            if !all {
                return Err(runtime("lemma check failed"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            if f.code == 2 {
                eprintln!("run `rbm <subcommand> --help` for usage");
            }
            ExitCode::from(f.code)
        }
    }
}
