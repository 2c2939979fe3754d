//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line
//! with the measured numbers, then asserts. MNIST is read from
//! `AUGDFA_DATA_DIR` or `<workspace>/data`.

use std::f64::consts::{FRAC_PI_4, PI};
use std::path::PathBuf;

use augdfa::activations::Activation;
use augdfa::data::{as_sequence, one_hot};
use augdfa::ffnet::{bp_update, forward, loss_and_error, EpochMetrics, FeedforwardNet};
use augdfa::numerics::{uniform_matrix, Matrix};
use augdfa::reservoir::{
    rc_alt_forward, rc_dfa_update, rc_forward, rc_readout, DeepReservoir, NoiseSpec, ReservoirSpec,
};
use augdfa::unitary::{
    compose_unitary, unitary_bp_update, unitary_derivative, unitary_forward, UnitaryLayer, UnitaryNet,
};
use augdfa::RngStream;
use augdfa_cli::config::{DatasetKind, ExperimentConfig, Model, Precision};
use augdfa_cli::pso::run_pso;
use augdfa_cli::run::{prepare, run_experiment, run_on, RunOutcome};

fn data_dir() -> PathBuf {
    std::env::var_os("AUGDFA_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn mnist_available() -> bool {
    data_dir().join("mnist").join("train-images-idx3-ubyte.gz").exists()
        || data_dir().join("mnist").join("train-images-idx3-ubyte").exists()
}

/// Writes through the raw stderr handle, which libtest does not capture, so
/// the verdict lines show up in a plain `cargo test` log.
fn say(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

fn report(n: u32, ok: bool, detail: &str) {
    say(&format!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" }));
    assert!(ok, "criterion {n} failed: {detail}");
}

fn require_mnist(n: u32) {
    if !mnist_available() {
        report(n, false, &format!("MNIST not found under {}", data_dir().display()));
    }
}

fn mnist(model: Model) -> ExperimentConfig {
    ExperimentConfig {
        model,
        dataset: DatasetKind::Mnist,
        data_dir: Some(data_dir()),
        precision: Precision::F32,
        ..ExperimentConfig::default()
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_01_bp_gradient_oracle() {
    const PROBES: usize = 100;
    const H: f64 = 1e-5;
    const REL_TOL: f64 = 1e-5;
    // relative error is taken against max(|a|, |fd|, FLOOR)
    const FLOOR: f64 = 1e-3;
    let start = std::time::Instant::now();
    let rng = RngStream::new(1);
    let net = FeedforwardNet::<f64>::new(&[8, 16, 16, 4], Activation::Tanh, Activation::Tanh.derivative(), &rng).unwrap();
    let x = uniform_matrix::<f64>(5, 8, -1.0, 1.0, &mut rng.derive(10)).unwrap();
    let labels: Vec<usize> = (0..5).map(|i| (i * 3) % 4).collect();
    let y = one_hot::<f64>(&labels, 4);
    let loss = |n: &FeedforwardNet<f64>| {
        let t = forward(n, &x).unwrap();
        loss_and_error(t.logits(), &y).unwrap().loss
    };
    let trace = forward(&net, &x).unwrap();
    let err = loss_and_error(trace.logits(), &y).unwrap();
    let upd = bp_update(&net, &trace, &err, false).unwrap();
    let mut pick = rng.derive(11);
    let mut worst = 0.0f64;
    for probe in 0..PROBES {
        let l = pick.below(net.layers.len());
        let (rows, cols) = (net.layers[l].w.rows(), net.layers[l].w.cols());
        // every tenth probe hits a bias
        let bias = probe % 10 == 9;
        let (i, j) = (pick.below(rows), pick.below(cols));
        let analytic = if bias { -upd[l].db[i] } else { -upd[l].dw[(i, j)] };
        let mut plus = net.clone();
        let mut minus = net.clone();
        if bias {
            plus.layers[l].bias[i] += H;
            minus.layers[l].bias[i] -= H;
        } else {
            plus.layers[l].w[(i, j)] += H;
            minus.layers[l].w[(i, j)] -= H;
        }
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * H);
        let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        worst <= REL_TOL && secs < 10.0,
        &format!("{PROBES} probes, worst rel err {worst:.2e} (tol {REL_TOL:.0e}), {secs:.2}s"),
    );
}

// ---------------------------------------------------------------- 2, 3

fn ffnet_cfg(hidden: usize, trainer: &str, g: &str) -> ExperimentConfig {
    ExperimentConfig {
        trainer: trainer.into(),
        f: "tanh".into(),
        g: Some(g.into()),
        hidden: vec![hidden; 4],
        lr: 0.2,
        epochs: 20,
        batch_size: 64,
        angle_probe: 64,
        ..mnist(Model::Ffnet)
    }
}

/// DFA over a spread of `g`, returning `(g, eta, outcome)`.
fn dfa_sweep(hidden: usize) -> Vec<(String, f64, RunOutcome)> {
    let gs = ["fprime", "sin", "cos", "shifted_sin:-1.5707963267948966", "triangle", "fourier_seed:3"];
    let base = ffnet_cfg(hidden, "dfa", "fprime");
    let data = prepare::<f32>(&base).unwrap();
    gs.iter()
        .map(|g| {
            let cfg = ffnet_cfg(hidden, "dfa", g);
            let o = run_on(&cfg, &data, None, None).unwrap();
            say(&format!("  dfa g={g} eta={:+.3} test {}", o.eta.unwrap(), pct(o.final_test_acc())));
            (g.to_string(), o.eta.unwrap(), o)
        })
        .collect()
}

fn check_dfa_robustness(hidden: usize, a_min: f64, b_min: f64) {
    require_mnist(2);
    let start = std::time::Instant::now();
    let runs = dfa_sweep(hidden);
    let fprime = runs.iter().find(|r| r.0 == "fprime").unwrap().2.final_test_acc();
    let low_eta: Vec<f64> = runs.iter().filter(|r| r.1.abs() <= 0.1).map(|r| r.2.final_test_acc()).collect();
    let low_best = low_eta.iter().cloned().fold(f64::NAN, f64::max);
    let diverged: Vec<&str> = runs.iter().filter(|r| r.2.history.diverged).map(|r| r.0.as_str()).collect();
    let ok = fprime >= a_min && !low_eta.is_empty() && low_eta.iter().all(|&a| a >= b_min) && diverged.is_empty();
    report(
        2,
        ok,
        &format!(
            "4x{hidden}: g=f' {} (need {}), |eta|<=0.1 worst {} best {} over {} runs (need {}), diverged {:?}, {:.0}s",
            pct(fprime),
            pct(a_min),
            pct(low_eta.iter().cloned().fold(f64::NAN, f64::min)),
            pct(low_best),
            low_eta.len(),
            pct(b_min),
            diverged,
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_dfa_robustness_reduced() {
    check_dfa_robustness(200, 0.95, 0.82);
}

#[test]
#[ignore = "about an hour on one core; run with --ignored"]
fn criterion_02_dfa_robustness_full() {
    check_dfa_robustness(800, 0.96, 0.85);
}

#[test]
fn criterion_03_bp_with_negative_eta_fails() {
    require_mnist(3);
    const MAX_ACC: f64 = 0.30;
    let mut lines = Vec::new();
    let mut ok = true;
    // -cos and sin(x - 3pi/4), both with eta <= -0.5 against tanh'
    for g in ["shifted_sin:-1.5707963267948966", "shifted_sin:-2.356194490092345"] {
        let cfg = ffnet_cfg(200, "bp_g", g);
        let o = run_experiment(&cfg, None).unwrap();
        let eta = o.eta.unwrap();
        let acc = o.final_test_acc();
        ok &= eta <= -0.5 && (o.history.diverged || acc <= MAX_ACC);
        lines.push(format!("g={g} eta={eta:+.3} test {} diverged {}", pct(acc), o.history.diverged));
    }
    report(3, ok, &format!("{} (need <= {} or diverged)", lines.join("; "), pct(MAX_ACC)));
}

// ---------------------------------------------------------------- 4

/// Per-layer angle averaged over the epochs where it is defined.
fn mean_layer_angles(epochs: &[EpochMetrics]) -> Vec<f64> {
    let layers = epochs.first().map_or(0, |m| m.angles.len());
    (0..layers)
        .map(|l| {
            let v: Vec<f64> = epochs.iter().map(|m| m.angles[l]).filter(|a| a.is_finite()).collect();
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        })
        .collect()
}

#[test]
fn criterion_04_alignment_angles() {
    require_mnist(4);
    let cfg_for = |trainer: &str, theta: f64| ExperimentConfig {
        trainer: trainer.into(),
        f: "cos".into(),
        g: Some(format!("shifted_sin:{theta}")),
        hidden: vec![200; 4],
        lr: 0.05,
        epochs: 4,
        train_limit: Some(20_000),
        eval_train_limit: Some(5_000),
        angle_probe: 128,
        ..mnist(Model::Ffnet)
    };
    let data = prepare::<f32>(&cfg_for("dfa", 0.0)).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for theta in [0.0, FRAC_PI_4, 3.0 * FRAC_PI_4, PI] {
        for trainer in ["dfa", "bp_g"] {
            let o = run_on(&cfg_for(trainer, theta), &data, None, None).unwrap();
            let eta = o.eta.unwrap();
            let angles = mean_layer_angles(&o.history.epochs);
            let worst = angles.iter().cloned().fold(f64::NAN, f64::max);
            let checked = match trainer {
                "dfa" if eta.abs() >= 0.3 => {
                    ok &= worst < 90.0;
                    "max < 90"
                }
                "bp_g" if eta < 0.0 => {
                    ok &= worst > 90.0;
                    "max > 90"
                }
                _ => "not checked",
            };
            let shown: Vec<String> = angles.iter().map(|a| format!("{a:.1}")).collect();
            say(&format!("  {trainer} theta={theta:.3} eta={eta:+.3} layer angles [{}] ({checked})", shown.join(", ")));
            lines.push(format!("{trainer}@{eta:+.2}:{worst:.1}"));
        }
    }
    report(4, ok, &format!("worst-layer mean angles {}", lines.join(" ")));
}

// ---------------------------------------------------------------- 5, 6

fn reservoir_cfg(layers: usize, trainer: &str) -> ExperimentConfig {
    ExperimentConfig {
        trainer: trainer.into(),
        nodes: 200,
        layers,
        alpha: 0.9,
        phi_bias: 1.0,
        phi_alt: 1.0 + PI,
        mask_scale: 1.0,
        deep_mask_scale: 0.1,
        lr: 0.02,
        mask_lr: Some(0.2),
        deep_mask_lr: Some(0.01),
        batch_size: 64,
        epochs: 4,
        ..mnist(Model::Reservoir)
    }
}

#[test]
fn criterion_05_reservoir_depth_trend() {
    require_mnist(5);
    const REPEATS: u64 = 3;
    const GAIN: f64 = 0.02;
    const BAND: f64 = 0.005;
    let data = prepare::<f32>(&reservoir_cfg(1, "dfa")).unwrap();
    let mean_acc = |layers: usize, trainer: &str| -> f64 {
        let accs: Vec<f64> = (0..REPEATS)
            .map(|seed| {
                let cfg = ExperimentConfig {
                    seed,
                    ..reservoir_cfg(layers, trainer)
                };
                run_on(&cfg, &data, None, None).unwrap().final_test_acc()
            })
            .collect();
        let shown: Vec<String> = accs.iter().map(|&a| pct(a)).collect();
        say(&format!("  {trainer} L={layers}: {}", shown.join(" ")));
        accs.iter().sum::<f64>() / accs.len() as f64
    };
    let readout = mean_acc(1, "readout_only");
    let dfa: Vec<f64> = (1..=3).map(|l| mean_acc(l, "dfa")).collect();
    let gain_ok = dfa[2] >= readout + GAIN;
    let monotone = dfa.windows(2).all(|w| w[1] >= w[0] - BAND);
    report(
        5,
        gain_ok && monotone,
        &format!(
            "readout-only L1 {}, dfa L1/L2/L3 {}/{}/{} (need L3 >= L1 readout + {:.1} pts: {gain_ok}; non-decreasing within {:.1} pts: {monotone})",
            pct(readout),
            pct(dfa[0]),
            pct(dfa[1]),
            pct(dfa[2]),
            100.0 * GAIN,
            100.0 * BAND
        ),
    );
}

#[test]
fn criterion_06_noise_flatness() {
    require_mnist(6);
    const SPREAD: f64 = 0.01;
    let base = ExperimentConfig {
        nodes: 100,
        epochs: 2,
        train_limit: Some(10_000),
        eval_train_limit: Some(2_000),
        ..reservoir_cfg(1, "dfa")
    };
    let data = prepare::<f32>(&base).unwrap();
    let mut errors = Vec::new();
    for eps in [0.0, 1e-3, 1e-2, 1e-1] {
        let o = run_on(&ExperimentConfig { epsilon: eps, ..base.clone() }, &data, None, None).unwrap();
        errors.push((eps, 1.0 - o.final_test_acc()));
    }
    let lo = errors.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let hi = errors.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);

    // epsilon = 0 against the noiseless path on one trained-size reservoir
    let shape = data.test.image_shape.unwrap();
    let spec = ReservoirSpec {
        nodes: 100,
        layers: 2,
        input_dim: shape.0,
        classes: 10,
        window: shape.1,
        alpha: 0.9,
        phi_bias: 1.0,
        phi_alt: 1.0 + PI,
        mask_scale: 1.0,
        deep_mask_scale: 0.1,
        allow_unstable: false,
        alt_mode: augdfa::reservoir::AltMode::Stored,
    };
    let res = DeepReservoir::<f32>::new(&spec, &RngStream::new(4)).unwrap();
    let view = as_sequence(&data.test, shape).unwrap();
    let idx: Vec<usize> = (0..64).collect();
    let seq = view.batch_steps(&idx);
    let e = uniform_matrix::<f32>(64, 10, -1.0, 1.0, &mut RngStream::new(5)).unwrap();
    let run = |noise: &mut NoiseSpec| {
        let mut t = rc_forward(&res, &seq, noise).unwrap();
        rc_alt_forward(&res, &mut t, noise).unwrap();
        let y = rc_readout(&res, &t).unwrap();
        let u = rc_dfa_update(&res, &t, &e).unwrap();
        (t.layers.iter().flat_map(|l| l.states.clone()).collect::<Vec<_>>(), y, u)
    };
    let silent = run(&mut NoiseSpec::none());
    let zero = run(&mut NoiseSpec::new(0.0, 99));
    let identical = silent.0.iter().zip(&zero.0).all(|(a, b)| a.as_slice() == b.as_slice())
        && silent.1.as_slice() == zero.1.as_slice()
        && silent.2 == zero.2;
    let shown: Vec<String> = errors.iter().map(|(e, err)| format!("eps={e}: {}", pct(*err))).collect();
    report(
        6,
        hi - lo <= SPREAD && identical,
        &format!(
            "test error {} spread {:.2} pts (need <= {:.1}); eps=0 bit-identical to noiseless path: {identical}",
            shown.join(", "),
            100.0 * (hi - lo),
            100.0 * SPREAD
        ),
    );
}

// ---------------------------------------------------------------- 7

/// Scalar transcription of the delay-ring recurrence: returns, per layer and
/// step, `(s_i, x_i)` where `x_i = cos(s_i + phi)` and
/// `s_i(n) = alpha x_{i-1}(n-1) + sum_v M_iv u_v(n)` with `x_{-1} = x_{N-1}`.
fn ring_oracle(res: &DeepReservoir<f64>, seq: &[Vec<f64>]) -> Vec<Vec<Vec<(f64, f64)>>> {
    let n = res.nodes();
    let mut input = seq.to_vec();
    let mut all = Vec::new();
    for layer in &res.layers {
        let mut x = vec![0.0; n];
        let mut steps = Vec::new();
        for u in &input {
            let mut next = vec![0.0; n];
            let mut rec = Vec::new();
            for i in 0..n {
                let mut s = layer.alpha * x[(i + n - 1) % n];
                for (v, uv) in u.iter().enumerate() {
                    s += layer.mask[(i, v)] * uv;
                }
                next[i] = (s + layer.phi_bias).cos();
                rec.push((s, next[i]));
            }
            steps.push(rec);
            x = next;
        }
        input = steps.iter().map(|r| r.iter().map(|p| p.1).collect()).collect();
        all.push(steps);
    }
    all
}

#[test]
fn criterion_07_reservoir_oracles() {
    const TOL: f64 = 1e-12;
    let mut worst = [0.0f64; 3];
    for (case, &(n, layers, t, v, k, b)) in [(2, 1, 2, 2, 2, 1), (3, 2, 3, 2, 3, 2), (4, 3, 4, 3, 2, 3), (4, 2, 4, 4, 3, 2)]
        .iter()
        .enumerate()
    {
        let spec = ReservoirSpec {
            nodes: n,
            layers,
            input_dim: v,
            classes: k,
            window: t,
            alpha: 0.7,
            phi_bias: 0.4,
            phi_alt: 0.4 + PI,
            mask_scale: 1.0,
            deep_mask_scale: 0.5,
            allow_unstable: false,
            alt_mode: augdfa::reservoir::AltMode::Stored,
        };
        let mut res = DeepReservoir::<f64>::new(&spec, &RngStream::new(case as u64)).unwrap();
        res.readout = uniform_matrix(k, t * n, -1.0, 1.0, &mut RngStream::new(50 + case as u64)).unwrap();
        let mut rng = RngStream::new(100 + case as u64);
        let seq: Vec<Matrix<f64>> = (0..t).map(|_| uniform_matrix(b, v, 0.0, 1.0, &mut rng).unwrap()).collect();
        let e = uniform_matrix::<f64>(b, k, -1.0, 1.0, &mut rng).unwrap();
        let mut trace = rc_forward(&res, &seq, &mut NoiseSpec::none()).unwrap();
        rc_alt_forward(&res, &mut trace, &mut NoiseSpec::none()).unwrap();
        let y = rc_readout(&res, &trace).unwrap();
        let upd = rc_dfa_update(&res, &trace, &e).unwrap();
        let mut dm_oracle: Vec<Matrix<f64>> = res.layers.iter().map(|l| Matrix::zeros(n, l.mask.cols())).collect();
        for bi in 0..b {
            let rows: Vec<Vec<f64>> = seq.iter().map(|m| m.row(bi).to_vec()).collect();
            let oracle = ring_oracle(&res, &rows);
            for (l, lo) in oracle.iter().enumerate() {
                for (step, so) in lo.iter().enumerate() {
                    for (i, &(s, x)) in so.iter().enumerate() {
                        worst[0] = worst[0].max((trace.layers[l].pre[step][(bi, i)] - s).abs());
                        worst[0] = worst[0].max((trace.layers[l].states[step][(bi, i)] - x).abs());
                    }
                }
            }
            // readout: y_k = sum_j sum_i w[k, j*N + i] x_i(T-1-j)
            let last = oracle.last().unwrap();
            for kk in 0..k {
                let mut acc = 0.0;
                for j in 0..t {
                    for i in 0..n {
                        acc += res.readout[(kk, j * n + i)] * last[t - 1 - j][i].1;
                    }
                }
                worst[1] = worst[1].max((y[(bi, kk)] - acc).abs());
            }
            // mask direction: -(1/B) sum_n (B e)_i x'_i(n) u_v(n), x' = sin(s + phi')
            for (l, lo) in oracle.iter().enumerate() {
                let layer = &res.layers[l];
                for (step, so) in lo.iter().enumerate() {
                    let input: Vec<f64> = if l == 0 { rows[step].clone() } else { oracle[l - 1][step].iter().map(|p| p.1).collect() };
                    for (i, &(s, _)) in so.iter().enumerate() {
                        let be: f64 = (0..k).map(|kk| res.feedback[l][(i, kk)] * e[(bi, kk)]).sum();
                        let d = be * (s + layer.phi_alt).sin();
                        for (vv, &u) in input.iter().enumerate() {
                            dm_oracle[l][(i, vv)] -= d * u / b as f64;
                        }
                    }
                }
            }
        }
        for (l, want) in dm_oracle.iter().enumerate() {
            let got = upd.dm[l].as_ref().unwrap();
            for (a, w) in got.as_slice().iter().zip(want.as_slice()) {
                worst[2] = worst[2].max((a - w).abs());
            }
        }
    }
    report(
        7,
        worst.iter().all(|&w| w <= TOL),
        &format!(
            "max abs diff forward {:.1e}, readout {:.1e}, dfa update {:.1e} (tol {TOL:.0e})",
            worst[0], worst[1], worst[2]
        ),
    );
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_unitary_mesh() {
    require_mnist(8);
    const UNITARY_TOL: f64 = 1e-10;
    const H: f64 = 1e-6;
    const REL_TOL: f64 = 1e-6;
    // errors are relative to max(|fd|, floor)
    const ENTRY_FLOOR: f64 = 1e-2;
    const GRAD_FLOOR: f64 = 1e-3;

    let mut defect = 0.0f64;
    for n in 2..=16 {
        for s in 0..4 {
            let layer = UnitaryLayer::<f64>::random(n, &mut RngStream::new(1000 * n as u64 + s));
            defect = defect.max(compose_unitary(&layer).unwrap().unitarity_defect());
        }
    }

    // dU/dparam for every phase of an 8-port layer
    let layer = UnitaryLayer::<f64>::random(8, &mut RngStream::new(3));
    let mut worst_du = 0.0f64;
    for p in layer.params() {
        let d = unitary_derivative(&layer, p).unwrap();
        let (mut plus, mut minus) = (layer.clone(), layer.clone());
        plus.set(p, layer.get(p) + H);
        minus.set(p, layer.get(p) - H);
        let (up, um) = (compose_unitary(&plus).unwrap(), compose_unitary(&minus).unwrap());
        for ((a, hi), lo) in d.as_slice().iter().zip(up.as_slice()).zip(um.as_slice()) {
            let fd = (hi - lo) / (2.0 * H);
            worst_du = worst_du.max((a - fd).norm() / fd.norm().max(ENTRY_FLOOR));
        }
    }

    // loss gradient of every phase of a 2-layer 8-port net
    let mut net = UnitaryNet::<f64>::new(8, 2, 4, Activation::Tanh.derivative(), &RngStream::new(4)).unwrap();
    let x = uniform_matrix::<f64>(6, 8, 0.0, 1.0, &mut RngStream::new(5)).unwrap();
    let y = one_hot::<f64>(&[0, 1, 2, 3, 1, 0], 4);
    let loss = |n: &UnitaryNet<f64>| loss_and_error(&unitary_forward(n, &x).unwrap().logits, &y).unwrap().loss;
    let t = unitary_forward(&net, &x).unwrap();
    let err = loss_and_error(&t.logits, &y).unwrap();
    let upd = unitary_bp_update(&net, &t, &err, false).unwrap();
    let mut worst_grad = 0.0f64;
    for l in 0..2 {
        let grad = upd.phases[l].as_ref().unwrap();
        for p in net.layers[l].params() {
            let v = net.layers[l].get(p);
            net.layers[l].set(p, v + H);
            let lp = loss(&net);
            net.layers[l].set(p, v - H);
            let lm = loss(&net);
            net.layers[l].set(p, v);
            let fd = (lp - lm) / (2.0 * H);
            worst_grad = worst_grad.max((-grad.get(p) - fd).abs() / fd.abs().max(GRAD_FLOOR));
        }
    }

    let cfg = ExperimentConfig {
        ports: 64,
        layers: 2,
        lr: 0.1,
        phase_lr: Some(0.01),
        epochs: 5,
        ..mnist(Model::Unitary)
    };
    let o = run_experiment(&cfg, None).unwrap();
    let losses: Vec<f64> = o.history.epochs.iter().map(|m| m.loss).collect();
    let decreasing = losses.len() == 5 && losses.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = losses.iter().map(|l| format!("{l:.4}")).collect();
    report(
        8,
        defect <= UNITARY_TOL && worst_du <= REL_TOL && worst_grad <= REL_TOL && decreasing,
        &format!(
            "unitarity defect {defect:.1e} (tol {UNITARY_TOL:.0e}); dU fd rel {worst_du:.1e}, loss-grad fd rel {worst_grad:.1e} (tol {REL_TOL:.0e}); train loss [{}], test {}",
            shown.join(", "),
            pct(o.final_test_acc())
        ),
    );
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_09_pso() {
    require_mnist(9);
    let start = std::time::Instant::now();
    let cfg = ExperimentConfig {
        trainer: "dfa".into(),
        hidden: vec![100; 4],
        lr: 0.2,
        epochs: 3,
        train_limit: Some(5_000),
        eval_train_limit: Some(1_000),
        angle_probe: 0,
        pso_generations: 5,
        pso_particles: 16,
        seed: 2,
        ..mnist(Model::Ffnet)
    };
    let r = run_pso(&cfg, None, 1).unwrap();
    let best: Vec<f64> = r.history.iter().map(|g| g.best_score).collect();
    let mean: Vec<f64> = r.history.iter().map(|g| g.mean_score).collect();
    let non_increasing = best.windows(2).all(|w| w[1] <= w[0]);
    let improved = best.last().unwrap() < &best[0];
    let fmt = |v: &[f64]| v.iter().map(|&x| pct(x)).collect::<Vec<_>>().join(" ");
    report(
        9,
        best.len() == 5 && non_increasing && improved,
        &format!(
            "best-so-far error [{}], generation means [{}], {:.0}s",
            fmt(&best),
            fmt(&mean),
            start.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 10

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let small = ExperimentConfig {
        dataset: DatasetKind::Synthetic,
        synthetic_train: 256,
        synthetic_test: 64,
        epochs: 2,
        seed: 11,
        ..ExperimentConfig::default()
    };
    let configs = [
        ("ffnet", ExperimentConfig { hidden: vec![32, 32], lr: 0.05, ..small.clone() }),
        ("elm", ExperimentConfig { model: Model::Elm, hidden: vec![32, 32, 32], ..small.clone() }),
        ("reservoir", ExperimentConfig { model: Model::Reservoir, nodes: 20, layers: 2, epsilon: 1e-2, ..small.clone() }),
        ("unitary", ExperimentConfig { model: Model::Unitary, ports: 16, layers: 2, ..small.clone() }),
        ("ffnet-f64", ExperimentConfig { hidden: vec![16], precision: Precision::F64, ..small.clone() }),
    ];
    let mut same = Vec::new();
    for (name, cfg) in &configs {
        let read = |tag: &str| {
            let out = dir.path().join(format!("{name}-{tag}"));
            run_experiment(cfg, Some(&out)).unwrap();
            std::fs::read(out.join("metrics.csv")).unwrap()
        };
        let (a, b) = (read("a"), read("b"));
        same.push((name.to_string(), a == b && a.len() > 60));
    }
    let all = same.iter().all(|s| s.1);
    report(10, all, &format!("byte-identical metrics.csv: {same:?}"));
}
