use super::*;
use crate::model::{Confine, NoiseSpec};
use crate::models::{
    model_cluster, model_dyson, model_hamiltonian1d, model_opinion, model_test1d, model_thomson,
    model_wealth, sample_initial, sbm_generate,
};

fn scalars(xs: &[f64]) -> ParticleEnsemble {
    ParticleEnsemble::from_scalars(xs.to_vec()).unwrap()
}

fn euler(model: &InteractionModel, kind: SchemeKind, p: usize) -> StepScheme {
    StepScheme::new(model, kind, Intra::Euler, p)
}

/// Classic RK4 on `y' = f(y)` with `steps` equal steps.
fn rk4(y0: &[f64], t: f64, steps: usize, f: &dyn Fn(&[f64], &mut [f64])) -> Vec<f64> {
    let m = y0.len();
    let h = t / steps as f64;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    for _ in 0..steps {
        f(&y, &mut k1);
        (0..m).for_each(|c| tmp[c] = y[c] + 0.5 * h * k1[c]);
        f(&tmp, &mut k2);
        (0..m).for_each(|c| tmp[c] = y[c] + 0.5 * h * k2[c]);
        f(&tmp, &mut k3);
        (0..m).for_each(|c| tmp[c] = y[c] + h * k3[c]);
        f(&tmp, &mut k4);
        (0..m).for_each(|c| y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]));
    }
    y
}

/// RK4 with the step count doubled until successive answers agree to 1e-13.
fn rk4_converged(y0: &[f64], t: f64, f: &dyn Fn(&[f64], &mut [f64])) -> Vec<f64> {
    let mut steps = 16;
    let mut prev = rk4(y0, t, steps, f);
    loop {
        steps *= 2;
        let next = rk4(y0, t, steps, f);
        let delta = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if delta < 1e-13 || steps >= 1 << 20 {
            return next;
        }
        prev = next;
    }
}

#[test]
fn pair_flows_match_rk4() {
    let mut rng = derive_stream(100, 0);
    for &tau in &[1e-4, 1e-3, 1e-2] {
        for _ in 0..20 {
            let (xi, xj) = loop {
                let (a, b) = (4.0 * rng.uniform() - 2.0, 4.0 * rng.uniform() - 2.0);
                if (a - b).abs() > 0.1 {
                    break (a, b);
                }
            };
            let exact = pair_exact_dyson(xi, xj, tau);
            let num = rk4_converged(&[xi, xj], tau, &|y, dy| {
                dy[0] = 1.0 / (y[0] - y[1]);
                dy[1] = -dy[0];
            });
            assert!((exact.0 - num[0]).abs() < 1e-10 && (exact.1 - num[1]).abs() < 1e-10);

            let rate = 10.0 * rng.uniform() - 5.0;
            let (mut a, mut b) = ([xi], [xj]);
            pair_exact_linear(&mut a, &mut b, rate, tau);
            let num = rk4_converged(&[xi, xj], tau, &|y, dy| {
                dy[0] = -rate * (y[0] - y[1]);
                dy[1] = -dy[0];
            });
            assert!((a[0] - num[0]).abs() < 1e-10 && (b[0] - num[1]).abs() < 1e-10);

            let x: [f64; 3] = std::array::from_fn(|_| rng.normal());
            let y: [f64; 3] = std::array::from_fn(|_| rng.normal());
            let (u, v) = pair_exact_coulomb3d(&x, &y, tau);
            let y0 = [x[0], x[1], x[2], y[0], y[1], y[2]];
            let num = rk4_converged(&y0, tau, &|s, ds| {
                let z = [s[0] - s[3], s[1] - s[4], s[2] - s[5]];
                let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
                for k in 0..3 {
                    ds[k] = z[k] / (r * r * r);
                    ds[k + 3] = -ds[k];
                }
            });
            for k in 0..3 {
                assert!((u[k] - num[k]).abs() < 1e-10 && (v[k] - num[k + 3]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn scheme_keywords_round_trip() {
    for k in [SchemeKind::Rbm1, SchemeKind::RbmR, SchemeKind::RbmRPrime, SchemeKind::Full] {
        assert_eq!(k.as_str().parse::<SchemeKind>().unwrap(), k);
    }
    for i in [Intra::Euler, Intra::EulerMaruyama, Intra::SplitExact, Intra::Verlet] {
        assert_eq!(i.to_string().parse::<Intra>().unwrap(), i);
    }
    assert!("rbm2".parse::<SchemeKind>().is_err());
}

#[test]
fn scheme_validation() {
    let t = model_test1d(1.0).unwrap();
    assert!(euler(&t, SchemeKind::Rbm1, 2).validate(&t, 10).is_ok());
    assert!(euler(&t, SchemeKind::Rbm1, 11).validate(&t, 10).is_err());
    assert!(euler(&t, SchemeKind::Rbm1, 1).validate(&t, 10).is_err());
    assert!(StepScheme::new(&t, SchemeKind::Rbm1, Intra::SplitExact, 2)
        .validate(&t, 10)
        .is_err());
    assert!(StepScheme::new(&t, SchemeKind::Rbm1, Intra::Verlet, 2).validate(&t, 10).is_err());

    let d = model_dyson(1.0, 10).unwrap();
    assert!(StepScheme::new(&d, SchemeKind::Rbm1, Intra::SplitExact, 2).validate(&d, 10).is_ok());
    assert!(StepScheme::new(&d, SchemeKind::Rbm1, Intra::SplitExact, 3)
        .validate(&d, 10)
        .is_err());
    assert!(StepScheme::new(&d, SchemeKind::Full, Intra::SplitExact, 2).validate(&d, 10).is_err());

    let h = model_hamiltonian1d().unwrap();
    assert!(euler(&h, SchemeKind::Rbm1, 2).validate(&h, 10).is_err());
    assert!(StepScheme::new(&h, SchemeKind::RbmR, Intra::Verlet, 2).validate(&h, 10).is_err());
    assert!(StepScheme::new(&h, SchemeKind::Full, Intra::Verlet, 2).validate(&h, 10).is_ok());

    let edges = BatchSampler::edges_of(&t);
    assert!(edges.is_err());
}

#[test]
fn rbm1_hand_example() {
    let model = model_test1d(0.0).unwrap();
    let mut e = scalars(&[0.0, 1.0]);
    let mut rng = derive_stream(1, 0);
    rbm1_step(&mut e, &model, &euler(&model, SchemeKind::Rbm1, 2), 0.1, &mut rng, None).unwrap();
    // K(z) = z / (1 + z^2) pushes the pair apart by tau * 1/2 each.
    assert!((e.positions()[0] + 0.05).abs() < 1e-15);
    assert!((e.positions()[1] - 1.05).abs() < 1e-15);
    assert!((e.time - 0.1).abs() < 1e-15);
}

#[test]
fn zero_dynamics_only_advance_time() {
    let model = InteractionModel::custom("zero", 1, Confine::None, Kernel::Zero, NoiseSpec::NONE);
    let xs = [0.3, -1.0, 2.0, 5.0];
    let mut rng = derive_stream(2, 0);
    for kind in [SchemeKind::Rbm1, SchemeKind::RbmR, SchemeKind::RbmRPrime, SchemeKind::Full] {
        let mut e = scalars(&xs);
        let scheme = euler(&model, kind, 2);
        match kind {
            SchemeKind::Rbm1 => rbm1_step(&mut e, &model, &scheme, 0.1, &mut rng, None),
            SchemeKind::RbmR => rbm_r_step(&mut e, &model, &scheme, 0.1, &mut rng),
            SchemeKind::RbmRPrime => rbm_r_prime_sweep(&mut e, &model, &scheme, 0.1, &mut rng),
            SchemeKind::Full => full_step(&mut e, &model, &scheme, 0.1, &mut rng, None),
        }
        .unwrap();
        assert_eq!(e.positions(), &xs);
        assert!(e.time > 0.0);
    }
}

#[test]
fn full_symmetric_configuration() {
    let model = model_test1d(1.0).unwrap();
    let mut e = scalars(&[-1.0, 0.0, 1.0]);
    let mut rng = derive_stream(3, 0);
    full_step(&mut e, &model, &euler(&model, SchemeKind::Full, 2), 0.1, &mut rng, None).unwrap();
    assert_eq!(e.positions()[1], 0.0);
    assert!((e.positions()[0] + e.positions()[2]).abs() < 1e-15);
}

#[test]
fn two_particles_rbm1_equals_full() {
    let model = model_test1d(1.0).unwrap().with_noise_for_test(0.5);
    let xs = [0.2, 0.9];
    let mut a = scalars(&xs);
    let mut b = scalars(&xs);
    let mut ia = Integrator::new(&model, euler(&model, SchemeKind::Rbm1, 2), 0.01, 9, 2).unwrap();
    let mut ib = Integrator::new(&model, euler(&model, SchemeKind::Full, 2), 0.01, 9, 2).unwrap();
    ia.advance(&mut a, 50).unwrap();
    ib.advance(&mut b, 50).unwrap();
    for (x, y) in a.positions().iter().zip(b.positions()) {
        assert!((x - y).abs() < 1e-14);
    }
}

impl InteractionModel {
    fn with_noise_for_test(mut self, sigma: f64) -> Self {
        self.noise = NoiseSpec::additive(sigma);
        self
    }
}

fn all_models(n: usize, rng: &mut RngStream) -> Vec<InteractionModel> {
    let (adj, _) = sbm_generate(&[n / 2, n - n / 2], 0.7, 0.3, rng).unwrap();
    vec![
        model_test1d(1.0).unwrap().with_noise_for_test(0.3),
        model_dyson(1.0, n).unwrap(),
        model_thomson().unwrap(),
        model_wealth(1.0, 1.0).unwrap(),
        model_opinion(40.0, Some(1.0 / 3.0)).unwrap(),
        model_cluster(Arc::new(adj), 40.0, 0.5).unwrap(),
    ]
}

#[test]
fn rbm1_with_single_batch_is_full_coupling() {
    let n = 12;
    for seed in 0..20 {
        let mut rng = derive_stream(seed, 77);
        for model in all_models(n, &mut rng) {
            let init = sample_initial(&model, n, &mut rng).unwrap();
            let mut a = init.clone();
            let mut b = init.clone();
            let mut ia = Integrator::new(&model, euler(&model, SchemeKind::Rbm1, n), 1e-3, seed, n)
                .unwrap();
            let mut ib = Integrator::new(&model, euler(&model, SchemeKind::Full, n), 1e-3, seed, n)
                .unwrap();
            ia.advance(&mut a, 5).unwrap();
            ib.advance(&mut b, 5).unwrap();
            for (x, y) in a.positions().iter().zip(b.positions()) {
                assert!((x - y).abs() <= 1e-14, "{} seed {seed}: {x} vs {y}", model.name);
            }
        }
    }
}

#[test]
fn parallel_and_serial_are_bit_identical() {
    let n = 1001;
    let mut rng = derive_stream(4, 0);
    for model in all_models(n, &mut rng) {
        let intra = if model.pair_exact.is_some() {
            Intra::SplitExact
        } else {
            Intra::Euler
        };
        let init = sample_initial(&model, n, &mut rng).unwrap();
        let serial = StepScheme::new(&model, SchemeKind::Rbm1, intra, 2);
        let parallel = serial.clone().with_parallel(true);
        let mut a = init.clone();
        let mut b = init.clone();
        Integrator::new(&model, serial, 1e-3, 5, n).unwrap().advance(&mut a, 10).unwrap();
        Integrator::new(&model, parallel, 1e-3, 5, n).unwrap().advance(&mut b, 10).unwrap();
        assert_eq!(a.positions(), b.positions(), "{}", model.name);
    }
}

#[test]
fn rbm_r_moves_only_the_batch() {
    let model = model_test1d(1.0).unwrap();
    let xs = [0.0, 1.0, 2.5, 4.0];
    let mut e = scalars(&xs);
    let mut rng = derive_stream(5, 0);
    rbm_r_step(&mut e, &model, &euler(&model, SchemeKind::RbmR, 2), 0.1, &mut rng).unwrap();
    let moved = e.positions().iter().zip(&xs).filter(|(a, b)| a != b).count();
    assert_eq!(moved, 2);
    assert!((e.time - 0.05).abs() < 1e-15);
}

#[test]
fn rbm_r_prime_overwrite_semantics() {
    // Pure confinement: each particle drawn at least once is scaled by (1 - tau)
    // exactly once, whatever the number of batches it appeared in.
    let model = InteractionModel::custom(
        "confine",
        1,
        Confine::Linear { beta: 1.0 },
        Kernel::Zero,
        NoiseSpec::NONE,
    );
    let n = 9;
    let xs: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let tau = 0.1;
    for seed in 0..20 {
        let mut e = scalars(&xs);
        let scheme = euler(&model, SchemeKind::RbmRPrime, 2);
        let mut rng = derive_stream(seed, 0);
        rbm_r_prime_sweep(&mut e, &model, &scheme, tau, &mut rng).unwrap();
        let mut replay = derive_stream(seed, 0);
        let drawn = random_batches_with_replacement(n, 2, batches_per_sweep(n, 2), &mut replay)
            .unwrap();
        for i in 0..n {
            let want = if drawn.batch_of(i).is_some() {
                xs[i] * (1.0 - tau)
            } else {
                xs[i]
            };
            assert_eq!(e.positions()[i], want);
        }
    }
}

#[test]
fn rbm_r_prime_single_batch_is_rbm1() {
    let model = model_test1d(1.0).unwrap();
    let xs = [0.1, -0.4, 1.3, 0.7];
    let mut a = scalars(&xs);
    let mut b = scalars(&xs);
    let mut r1 = derive_stream(6, 0);
    let mut r2 = derive_stream(6, 1);
    rbm_r_prime_sweep(&mut a, &model, &euler(&model, SchemeKind::RbmRPrime, 4), 0.1, &mut r1)
        .unwrap();
    rbm1_step(&mut b, &model, &euler(&model, SchemeKind::Rbm1, 4), 0.1, &mut r2, None).unwrap();
    for (x, y) in a.positions().iter().zip(b.positions()) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn rbm_r_prime_disjoint_batches_match_sequential() {
    let model = model_test1d(1.0).unwrap();
    let n = 6;
    let xs = [0.1, -0.4, 1.3, 0.7, 2.0, -1.5];
    let scheme_p = euler(&model, SchemeKind::RbmRPrime, 2);
    let scheme_r = euler(&model, SchemeKind::RbmR, 2);
    let mut found = 0;
    for seed in 0..200 {
        let mut probe = derive_stream(seed, 0);
        let drawn = random_batches_with_replacement(n, 2, 3, &mut probe).unwrap();
        if !drawn.covering {
            continue;
        }
        found += 1;
        let mut a = scalars(&xs);
        rbm_r_prime_sweep(&mut a, &model, &scheme_p, 0.1, &mut derive_stream(seed, 0)).unwrap();
        let mut b = scalars(&xs);
        let mv = BatchMove::new(&model, &scheme_r, 0.1, n);
        for batch in &drawn.batches {
            let mut out = vec![0.0; 2];
            mv.evolve(&b, batch, &[], &mut out);
            scatter(&mut b, batch, &out);
        }
        assert_eq!(a.positions(), b.positions());
    }
    assert!(found > 0);
}

#[test]
fn dyson_split_keeps_order() {
    let n = 200;
    let model = model_dyson(1.0, n).unwrap();
    let mut rng = derive_stream(7, 0);
    let mut e = sample_initial(&model, n, &mut rng).unwrap();
    let scheme = StepScheme::new(&model, SchemeKind::Rbm1, Intra::SplitExact, 2);
    let mut it = Integrator::new(&model, scheme, 1e-3, 7, n).unwrap();
    it.advance(&mut e, 500).unwrap();
    assert!(e.first_non_finite().is_none());
    let var = e.positions().iter().map(|x| x * x).sum::<f64>() / n as f64;
    assert!(var > 0.5 && var < 1.5, "{var}");
}

#[test]
fn thomson_stays_on_sphere_and_loses_energy() {
    let n = 30;
    let model = model_thomson().unwrap();
    let mut rng = derive_stream(8, 0);
    let mut e = sample_initial(&model, n, &mut rng).unwrap();
    let energy = |e: &ParticleEnsemble| {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let mut z = [0.0; 3];
                diff(e.position(i), e.position(j), &mut z);
                s += 1.0 / (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
            }
        }
        s / (n - 1) as f64
    };
    let e0 = energy(&e);
    let scheme = StepScheme::new(&model, SchemeKind::RbmR, Intra::SplitExact, 2);
    let mut it = Integrator::new(&model, scheme, 1e-3, 8, n).unwrap();
    it.advance(&mut e, 500).unwrap();
    for i in 0..n {
        let r = e.position(i).iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((r - 1.0).abs() < 1e-12);
    }
    assert!(energy(&e) < e0);
    assert!((e.time - 0.5).abs() < 1e-12);
}

#[test]
fn opinion_hull_contracts() {
    let n = 100;
    let model = model_opinion(40.0, None).unwrap();
    let mut rng = derive_stream(9, 0);
    let mut e = sample_initial(&model, n, &mut rng).unwrap();
    let scheme = StepScheme::new(&model, SchemeKind::Rbm1, Intra::SplitExact, 2);
    let mut it = Integrator::new(&model, scheme, 1e-4, 9, n).unwrap();
    let hull = |e: &ParticleEnsemble| {
        let x = e.positions();
        (
            x.iter().cloned().fold(f64::INFINITY, f64::min),
            x.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let (mut lo, mut hi) = hull(&e);
    for _ in 0..300 {
        it.step(&mut e).unwrap();
        let (l, h) = hull(&e);
        assert!(l >= lo - 1e-12 && h <= hi + 1e-12, "{l} {lo} {h} {hi}");
        (lo, hi) = (l, h);
    }
}

#[test]
fn opinion_consensus_inside_unit_window() {
    let n = 50;
    let model = model_opinion(40.0, None).unwrap();
    let mut rng = derive_stream(10, 0);
    let xs: Vec<f64> = (0..n).map(|_| 3.0 + 0.9 * rng.uniform()).collect();
    let mut e = scalars(&xs);
    let scheme = StepScheme::new(&model, SchemeKind::Rbm1, Intra::SplitExact, 2);
    let mut it = Integrator::new(&model, scheme, 1e-3, 10, n).unwrap();
    let width = |e: &ParticleEnsemble| {
        let x = e.positions();
        x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - x.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let mut w = width(&e);
    for _ in 0..500 {
        it.step(&mut e).unwrap();
        let now = width(&e);
        assert!(now <= w);
        w = now;
    }
    assert!(w < 1e-6, "{w}");
}

#[test]
fn cluster_mean_is_invariant() {
    let mut rng = derive_stream(11, 0);
    let (adj, _) = sbm_generate(&[20, 30], 0.7, 0.3, &mut rng).unwrap();
    let model = model_cluster(Arc::new(adj), 40.0, 0.5).unwrap();
    let mut e = sample_initial(&model, 50, &mut rng).unwrap();
    let sum0: f64 = e.positions().iter().sum();
    for sampler in [BatchSampler::Uniform, BatchSampler::edges_of(&model).unwrap()] {
        let scheme =
            StepScheme::new(&model, SchemeKind::RbmR, Intra::SplitExact, 2).with_sampler(sampler);
        let mut it = Integrator::new(&model, scheme, 1e-3, 11, 50).unwrap();
        it.advance(&mut e, 50).unwrap();
        let sum: f64 = e.positions().iter().sum();
        assert!((sum - sum0).abs() < 1e-9 * sum0.abs());
    }
}

#[test]
fn wealth_positive_and_mean_preserving() {
    let n = 2000;
    let model = model_wealth(1.0, 1.0).unwrap();
    let mut rng = derive_stream(12, 0);
    let mut e = sample_initial(&model, n, &mut rng).unwrap();
    let m0 = e.positions().iter().sum::<f64>() / n as f64;
    let scheme = StepScheme::new(&model, SchemeKind::Rbm1, Intra::SplitExact, 2);
    let mut it = Integrator::new(&model, scheme, 1e-3, 12, n).unwrap();
    it.advance(&mut e, 300).unwrap();
    assert!(e.positions().iter().all(|&y| y > 0.0));
    let m1 = e.positions().iter().sum::<f64>() / n as f64;
    // The pair drift keeps the sum exactly; the lognormal noise is mean-preserving.
    assert!((m1 - m0).abs() < 0.05 * m0, "{m0} {m1}");
}

#[test]
fn blow_up_names_step_and_particle() {
    let model = InteractionModel::custom(
        "explode",
        1,
        Confine::Custom(Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0] * 1e300)),
        Kernel::Zero,
        NoiseSpec::NONE,
    );
    let mut e = scalars(&[0.0, 0.0, 1e10]);
    let mut it = Integrator::new(&model, euler(&model, SchemeKind::Full, 2), 1.0, 0, 3).unwrap();
    match it.advance(&mut e, 5) {
        Err(Error::BlowUp { step, particle }) => assert_eq!((step, particle), (0, 2)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn noise_refinement_aggregates_fine_increments() {
    let src1 = NoiseSource::new(3, 1).unwrap();
    let src4 = NoiseSource::new(3, 4).unwrap();
    let mut coarse = vec![0.0; 5];
    src4.fill(2, &mut coarse);
    let mut sum = vec![0.0; 5];
    let mut fine = vec![0.0; 5];
    for k in 8..12 {
        src1.fill(k, &mut fine);
        for (s, f) in sum.iter_mut().zip(&fine) {
            *s += f;
        }
    }
    for (c, s) in coarse.iter().zip(&sum) {
        assert!((c - s / 2.0).abs() < 1e-14);
    }
    assert!(NoiseSource::new(3, 0).is_err());
}

#[test]
fn kernel_free_runs_coincide_across_step_sizes() {
    // With no interaction and pure confinement the coupled runs differ only by
    // the Euler error of the linear ODE.
    let model = InteractionModel::custom(
        "free",
        1,
        Confine::Linear { beta: 1.0 },
        Kernel::Zero,
        NoiseSpec::NONE,
    );
    let xs = [1.0, -2.0];
    let mut a = scalars(&xs);
    let mut b = scalars(&xs);
    Integrator::new(&model, euler(&model, SchemeKind::Rbm1, 2), 0.5, 1, 2)
        .unwrap()
        .advance(&mut a, 2)
        .unwrap();
    Integrator::new(&model, euler(&model, SchemeKind::Full, 2), 0.5, 1, 2)
        .unwrap()
        .advance(&mut b, 2)
        .unwrap();
    assert!((a.positions()[0] - 0.25).abs() < 1e-10);
    assert_eq!(a.positions(), b.positions());
}

#[test]
fn verlet_free_motion_and_momentum() {
    let model = InteractionModel {
        kernel: Kernel::Zero,
        ..model_hamiltonian1d().unwrap()
    };
    let e0 = scalars(&[0.0, 1.0]).with_velocities(vec![1.0, -0.5]).unwrap();
    let mut e = e0.clone();
    let mut st = VerletState::new();
    let mut rng = derive_stream(0, 0);
    let mut last = e.positions().to_vec();
    let mut deltas = Vec::new();
    for _ in 0..10 {
        verlet_step(&mut e, &model, 0.1, ForceMode::Full, &mut rng, &mut st).unwrap();
        deltas.push(e.positions()[0] - last[0]);
        last = e.positions().to_vec();
    }
    assert!(deltas.iter().all(|d| (d - 0.1).abs() < 1e-14));

    let h = model_hamiltonian1d().unwrap();
    let mut rng = derive_stream(13, 0);
    let mut e = sample_initial(&h, 100, &mut rng).unwrap();
    let p0: f64 = e.velocities().unwrap().iter().sum();
    let mut st = VerletState::new();
    for _ in 0..1000 {
        verlet_step(&mut e, &h, 1e-3, ForceMode::Full, &mut rng, &mut st).unwrap();
    }
    let p1: f64 = e.velocities().unwrap().iter().sum();
    // Velocities are position differences over tau, so rounding in the
    // positions is amplified by 1/tau.
    assert!((p1 - p0).abs() < 1e-9, "{p0} {p1}");

    let mut bare = scalars(&[0.0, 1.0]);
    assert!(verlet_step(&mut bare, &h, 0.1, ForceMode::Full, &mut rng, &mut st).is_err());
}

#[test]
fn verlet_harmonic_energy() {
    let model = InteractionModel {
        confine: Confine::Linear { beta: 1.0 },
        kernel: Kernel::Zero,
        ..model_hamiltonian1d().unwrap()
    };
    let drift = |tau: f64| {
        let mut e = scalars(&[1.0, 1.0]).with_velocities(vec![0.0, 0.0]).unwrap();
        let mut st = VerletState::new();
        let mut rng = derive_stream(0, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..steps_for(1.0, tau) {
            verlet_step(&mut e, &model, tau, ForceMode::Full, &mut rng, &mut st).unwrap();
            let (x, v) = (e.positions()[0], e.velocities().unwrap()[0]);
            worst = worst.max((0.5 * v * v + 0.5 * x * x - 0.5).abs());
        }
        worst
    };
    let (a, b) = (drift(0.01), drift(0.005));
    assert!(a < 1e-3);
    let ratio = a / b;
    assert!(ratio > 3.0 && ratio < 5.0, "{ratio}");
}

#[test]
fn verlet_symmetric_pair_keeps_center() {
    let h = model_hamiltonian1d().unwrap();
    let mut e = scalars(&[-0.7, 0.7]).with_velocities(vec![0.3, -0.3]).unwrap();
    let scheme = StepScheme::new(&h, SchemeKind::Rbm1, Intra::Verlet, 2);
    let mut it = Integrator::new(&h, scheme, 0.01, 1, 2).unwrap();
    for _ in 0..200 {
        it.step(&mut e).unwrap();
        assert!((e.positions()[0] + e.positions()[1]).abs() < 1e-13);
    }
}

#[test]
fn integrator_time_is_exact_multiple() {
    let model = model_test1d(1.0).unwrap();
    let mut e = scalars(&[0.0, 1.0, 2.0]);
    let mut it = Integrator::new(&model, euler(&model, SchemeKind::Rbm1, 2), 0.1, 1, 3).unwrap();
    it.advance(&mut e, 30).unwrap();
    assert_eq!(e.time, 30.0 * 0.1);
    assert_eq!(it.steps_taken(), 30);
    assert_eq!(steps_for(1.0, 2f64.powi(-7)), 128);
}
