//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Trained baselines are cached under `CARGO_TARGET_TMPDIR`, keyed by a
//! fingerprint of rendered frames and training options. Set `VEM_RETRAIN=1`
//! to ignore the cache, and `VEM_STRICT=1` to exit non-zero on any failure.

mod common;

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use episodic_explore::baselines::{vae_forward, vae_loss, window_bonus, VaeModel};
use episodic_explore::harness::{
    analyze_forgetting, evaluate_rooms, run_trial, run_with_setup, tour_frames, train_baseline,
    Condition, Corpus, ExperimentConfig, ExperimentResult, ForgettingCriteria, ModelKind,
    TrainOptions, TrialRecord, TrialSetup,
};
use episodic_explore::memory::*;
use episodic_explore::nn::gradcheck::{max_rel_error, numeric_grad, numeric_grad_at};
use episodic_explore::nn::*;
use episodic_explore::ssim::{ssim_frame, ssim_sequence, SsimConfig};
use episodic_explore::world::{CameraConfig, RoomTag, WorldSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_TOL: f64 = 1e-5;
const GRAD_SEEDS: u64 = 20;
const GRAD_SECONDS: f64 = 120.0;
const SSIM_TOL: f64 = 1e-12;
const TRAIN_SECONDS: f64 = 1800.0;
const EVAL_WINDOWS: usize = 64;
const EVAL_STRIDE: usize = 5;
const ORDER_MARGIN: f64 = 0.05;
const STUDY_TRIALS: usize = 10;
const STUDY_SECONDS: f64 = 3600.0;
const LSTM_MIN_FRACTION: f64 = 0.75;
const FRONTIER_BAND: (f64, f64) = (0.35, 0.65);
const SIGNIFICANCE: f64 = 0.05;
const FORGETTING_TRIALS: usize = 10;
const FORGETTING_FLAGGED: usize = 7;
const FORGETTING_MAX_TRIALS: usize = 60;
const SNAPSHOT_VERSIONS: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn report(id: &str, name: &str, f: impl FnOnce() -> Outcome) -> usize {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Outcome::new(false, format!("panicked: {msg}"))
    });
    println!(
        "criterion {id:<2} {} {name}: {} [{:.1} s]",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.detail,
        start.elapsed().as_secs_f64()
    );
    usize::from(outcome.pass)
}

fn rand_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize, scale: f64) -> Tensor3 {
    Tensor3::from_vec(
        c,
        h,
        w,
        (0..c * h * w)
            .map(|_| rng.gen_range(-scale..scale))
            .collect(),
    )
    .unwrap()
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn dot(a: &Tensor3, b: &Tensor3) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn rand_frame(rng: &mut ChaCha8Rng, n: usize) -> Frame {
    Frame::new(n, n, (0..n * n).map(|_| rng.gen()).collect()).unwrap()
}

fn conv_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stride = 1 + (seed as usize % 2);
    let mut k = ConvKernelSet::zeros(3, 2, 3, 3, stride, 1).unwrap();
    k.weights = rand_vec(&mut rng, k.weights.len(), 1.0);
    k.bias = rand_vec(&mut rng, 3, 1.0);
    let x = rand_tensor(&mut rng, 2, 6, 5, 1.0);
    let (c, h, w) = conv2d_forward(&x, &k).unwrap().shape();
    let up = rand_tensor(&mut rng, c, h, w, 1.0);
    let g = conv2d_backward(&x, &k, &up).unwrap();
    let loss = |x: &Tensor3, k: &ConvKernelSet| dot(&conv2d_forward(x, k).unwrap(), &up);
    let nx = numeric_grad(x.data(), |v| {
        loss(&Tensor3::from_vec(2, 6, 5, v.to_vec()).unwrap(), &k)
    });
    let nw = numeric_grad(&k.weights, |v| {
        let mut q = k.clone();
        q.weights.copy_from_slice(v);
        loss(&x, &q)
    });
    let nb = numeric_grad(&k.bias, |v| {
        let mut q = k.clone();
        q.bias.copy_from_slice(v);
        loss(&x, &q)
    });
    max_rel_error(g.grad_input.data(), &nx)
        .max(max_rel_error(&g.grad_weights, &nw))
        .max(max_rel_error(&g.grad_bias, &nb))
}

fn deconv_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stride = 1 + (seed as usize % 2);
    let mut k = ConvTransposeKernelSet::zeros(2, 3, 3, 3, stride, 1, stride - 1).unwrap();
    k.weights = rand_vec(&mut rng, k.weights.len(), 1.0);
    k.bias = rand_vec(&mut rng, 3, 1.0);
    let x = rand_tensor(&mut rng, 2, 4, 5, 1.0);
    let (c, h, w) = conv_transpose2d_forward(&x, &k).unwrap().shape();
    let up = rand_tensor(&mut rng, c, h, w, 1.0);
    let g = conv_transpose2d_backward(&x, &k, &up).unwrap();
    let loss = |x: &Tensor3, k: &ConvTransposeKernelSet| {
        dot(&conv_transpose2d_forward(x, k).unwrap(), &up)
    };
    let nx = numeric_grad(x.data(), |v| {
        loss(&Tensor3::from_vec(2, 4, 5, v.to_vec()).unwrap(), &k)
    });
    let nw = numeric_grad(&k.weights, |v| {
        let mut q = k.clone();
        q.weights.copy_from_slice(v);
        loss(&x, &q)
    });
    let nb = numeric_grad(&k.bias, |v| {
        let mut q = k.clone();
        q.bias.copy_from_slice(v);
        loss(&x, &q)
    });
    max_rel_error(g.grad_input.data(), &nx)
        .max(max_rel_error(&g.grad_weights, &nw))
        .max(max_rel_error(&g.grad_bias, &nb))
}

fn bptt_error(seed: u64) -> f64 {
    const STEPS: usize = WINDOW_LEN;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cin, hid, hw) = (2, 2, 3);
    let mut p = ConvLstmCellParams::zeros(cin, hid, 3).unwrap();
    p.kernel.weights = rand_vec(&mut rng, p.kernel.weights.len(), 0.5);
    p.kernel.bias = rand_vec(&mut rng, p.kernel.bias.len(), 0.5);
    let xs: Vec<Tensor3> = (0..STEPS)
        .map(|_| rand_tensor(&mut rng, cin, hw, hw, 1.0))
        .collect();
    let h0 = rand_tensor(&mut rng, hid, hw, hw, 0.5);
    let c0 = rand_tensor(&mut rng, hid, hw, hw, 0.5);
    let ups: Vec<Tensor3> = (0..STEPS)
        .map(|_| rand_tensor(&mut rng, hid, hw, hw, 1.0))
        .collect();
    let loss = |p: &ConvLstmCellParams, xs: &[Tensor3], h0: &Tensor3, c0: &Tensor3| -> f64 {
        let tr = convlstm_forward_sequence(xs, h0, c0, p).unwrap();
        tr.hidden.iter().zip(&ups).map(|(h, u)| dot(h, u)).sum()
    };
    let trace = convlstm_forward_sequence(&xs, &h0, &c0, &p).unwrap();
    let g = convlstm_backward(&trace.caches, &ups, &p).unwrap();
    let nw = numeric_grad(&p.kernel.weights, |w| {
        let mut q = p.clone();
        q.kernel.weights.copy_from_slice(w);
        loss(&q, &xs, &h0, &c0)
    });
    let nb = numeric_grad(&p.kernel.bias, |b| {
        let mut q = p.clone();
        q.kernel.bias.copy_from_slice(b);
        loss(&q, &xs, &h0, &c0)
    });
    let mut err = max_rel_error(&g.grad_weights, &nw).max(max_rel_error(&g.grad_bias, &nb));
    for t in 0..STEPS {
        let nx = numeric_grad(xs[t].data(), |v| {
            let mut ys = xs.clone();
            ys[t] = Tensor3::from_vec(cin, hw, hw, v.to_vec()).unwrap();
            loss(&p, &ys, &h0, &c0)
        });
        err = err.max(max_rel_error(g.grad_inputs[t].data(), &nx));
    }
    let nh = numeric_grad(h0.data(), |v| {
        loss(
            &p,
            &xs,
            &Tensor3::from_vec(hid, hw, hw, v.to_vec()).unwrap(),
            &c0,
        )
    });
    let nc = numeric_grad(c0.data(), |v| {
        loss(
            &p,
            &xs,
            &h0,
            &Tensor3::from_vec(hid, hw, hw, v.to_vec()).unwrap(),
        )
    });
    err.max(max_rel_error(g.grad_h0.data(), &nh))
        .max(max_rel_error(g.grad_c0.data(), &nc))
}

fn mse_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<Tensor3> = (0..3)
        .map(|_| rand_tensor(&mut rng, 2, 3, 4, 1.0))
        .collect();
    let b: Vec<Tensor3> = (0..3)
        .map(|_| rand_tensor(&mut rng, 2, 3, 4, 1.0))
        .collect();
    let (_, g) = mse_loss(&a, &b).unwrap();
    let flat: Vec<f64> = a.iter().flat_map(|t| t.data().to_vec()).collect();
    let num = numeric_grad(&flat, |v| {
        let seq: Vec<Tensor3> = v
            .chunks(24)
            .map(|c| Tensor3::from_vec(2, 3, 4, c.to_vec()).unwrap())
            .collect();
        mse_loss(&seq, &b).unwrap().0
    });
    let ana: Vec<f64> = g.iter().flat_map(|t| t.data().to_vec()).collect();
    max_rel_error(&ana, &num)
}

fn elbo_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rand_frame(&mut rng, 4);
    let recon: Vec<f64> = (0..16).map(|_| rng.gen_range(0.05..0.95)).collect();
    let mean = rand_vec(&mut rng, 3, 1.0);
    let logvar = rand_vec(&mut rng, 3, 1.0);
    let elbo = |r: &[f64], m: &[f64], v: &[f64]| {
        vae_loss(&Frame::new(4, 4, r.to_vec()).unwrap(), &target, m, v, 1.0)
            .unwrap()
            .loss
    };
    let l = vae_loss(
        &Frame::new(4, 4, recon.clone()).unwrap(),
        &target,
        &mean,
        &logvar,
        1.0,
    )
    .unwrap();
    let nr = numeric_grad(&recon, |r| elbo(r, &mean, &logvar));
    let nm = numeric_grad(&mean, |m| elbo(&recon, m, &logvar));
    let nv = numeric_grad(&logvar, |v| elbo(&recon, &mean, v));
    let mut err = max_rel_error(&l.d_recon, &nr)
        .max(max_rel_error(&l.d_mean, &nm))
        .max(max_rel_error(&l.d_logvar, &nv));

    let m = VaeModel::build(8, 4, seed).unwrap();
    let frame = rand_frame(&mut rng, 8);
    let noise = rand_vec(&mut rng, 4, 1.0);
    let out = vae_forward(&m, &frame, &noise).unwrap();
    let (out2, cache) = m.forward_cached(&frame, &noise).unwrap();
    assert_eq!(out, out2);
    let l = vae_loss(&out.reconstruction, &frame, &out.mean, &out.logvar, 1.0).unwrap();
    let mut grads = m.clone();
    grads.load_flat_params(&vec![0.0; m.param_count()]).unwrap();
    m.backward_into(&cache, &out, &l.d_recon, &l.d_mean, &l.d_logvar, &mut grads)
        .unwrap();
    let analytic = grads.flat_params();
    let base = m.flat_params();
    let idx: Vec<usize> = (0..40).map(|_| rng.gen_range(0..base.len())).collect();
    let numeric = numeric_grad_at(&base, &idx, |p| {
        let mut probe = m.clone();
        probe.load_flat_params(p).unwrap();
        probe.frame_loss(&frame, &noise).unwrap()
    });
    let picked: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
    err = err.max(max_rel_error(&picked, &numeric));
    err
}

fn small_arch() -> ArchDescriptor {
    ArchDescriptor {
        frame_size: 8,
        conv_channels: vec![2, 3],
        conv_kernel: 3,
        encoder_lstm: vec![3, 2],
        decoder_lstm: vec![2],
        lstm_kernel: 3,
        deconv_channels: vec![2, 1],
    }
}

fn random_window(rng: &mut ChaCha8Rng, size: usize) -> SequenceWindow {
    let frames = (0..WINDOW_LEN).map(|_| rand_frame(rng, size)).collect();
    SequenceWindow::new(frames, 0).unwrap()
}

fn autoencoder_error(seed: u64) -> f64 {
    let m = AutoencoderModel::build(small_arch(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random_window(&mut rng, 8);
    let targets = w.to_tensors();
    let (out, cache) = m.forward_cached(&targets).unwrap();
    let (_, g) = mse_loss(&out, &targets).unwrap();
    let analytic = m.backward(&cache, &g).unwrap().flat_params();
    let base = m.flat_params();
    let idx: Vec<usize> = (0..40).map(|_| rng.gen_range(0..base.len())).collect();
    let numeric = numeric_grad_at(&base, &idx, |p| {
        let mut probe = m.clone();
        probe.load_flat_params(p).unwrap();
        probe.loss(&w).unwrap()
    });
    let picked: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
    max_rel_error(&picked, &numeric)
}

fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let ops: [(&str, fn(u64) -> f64); 6] = [
        ("conv", conv_error),
        ("deconv", deconv_error),
        ("convlstm_bptt_t10", bptt_error),
        ("mse", mse_error),
        ("vae_elbo", elbo_error),
        ("autoencoder", autoencoder_error),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for (name, f) in ops {
        let worst = (0..GRAD_SEEDS).map(|s| f(1000 + s)).fold(0.0, f64::max);
        pass &= worst < GRAD_TOL;
        write!(detail, "{name} {worst:.1e}  ").unwrap();
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < GRAD_SECONDS;
    write!(
        detail,
        "({GRAD_SEEDS} seeds each, tol {GRAD_TOL:.0e}, {secs:.1} s < {GRAD_SECONDS} s)"
    )
    .unwrap();
    Outcome::new(pass, detail)
}

/// Independent window enumeration with two-pass moments.
fn brute_ssim(x: &Frame, y: &Frame, cfg: &SsimConfig, product_denominator: bool) -> f64 {
    let (h, w, k) = (x.height(), x.width(), cfg.window);
    let mut scores = Vec::new();
    let mut top = 0;
    while top + k <= h {
        let mut left = 0;
        while left + k <= w {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in top..top + k {
                for c in left..left + k {
                    xs.push(x.get(r, c));
                    ys.push(y.get(r, c));
                }
            }
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
            let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
            let cxy = xs
                .iter()
                .zip(&ys)
                .map(|(a, b)| (a - mx) * (b - my))
                .sum::<f64>()
                / n;
            let lum = if product_denominator {
                mx * mx * my * my + cfg.c1
            } else {
                mx * mx + my * my + cfg.c1
            };
            scores
                .push((2.0 * mx * my + cfg.c1) * (2.0 * cxy + cfg.c2) / (lum * (vx + vy + cfg.c2)));
            left += cfg.stride;
        }
        top += cfg.stride;
    }
    scores.iter().sum::<f64>() / scores.len() as f64
}

fn ssim_correctness() -> Outcome {
    let cfg = SsimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut identity, mut symmetry, mut brute, mut bound) =
        (0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    for i in 0..50 {
        let x = rand_frame(&mut rng, FRAME_SIZE);
        let noisy: Vec<f64> = x
            .data()
            .iter()
            .map(|v| (v + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0))
            .collect();
        let y = if i % 2 == 0 {
            rand_frame(&mut rng, FRAME_SIZE)
        } else {
            Frame::new(FRAME_SIZE, FRAME_SIZE, noisy).unwrap()
        };
        let flat = Frame::filled(FRAME_SIZE, FRAME_SIZE, rng.gen());
        for f in [&x, &y, &flat] {
            identity = identity.max((ssim_frame(f, f, &cfg).unwrap() - 1.0).abs());
        }
        let xy = ssim_frame(&x, &y, &cfg).unwrap();
        symmetry = symmetry.max((xy - ssim_frame(&y, &x, &cfg).unwrap()).abs());
        brute = brute.max((xy - brute_ssim(&x, &y, &cfg, false)).abs());
        bound = bound.max(xy);
    }
    let wx = random_window(&mut rng, FRAME_SIZE);
    let wy = random_window(&mut rng, FRAME_SIZE);
    let seq = ssim_sequence(&wx, &wy, &cfg).unwrap();
    let per_frame: f64 = wx
        .frames()
        .iter()
        .zip(wy.frames())
        .map(|(a, b)| ssim_frame(a, b, &cfg).unwrap())
        .sum::<f64>()
        / WINDOW_LEN as f64;
    let sequence = (seq - per_frame).abs();
    identity = identity.max((ssim_sequence(&wx, &wx, &cfg).unwrap() - 1.0).abs());

    let x = rand_frame(&mut rng, FRAME_SIZE);
    let product_identity = brute_ssim(&x, &x, &cfg, true);
    let product_breaks = (product_identity - 1.0).abs() > 1e-3;

    let pass = identity <= SSIM_TOL
        && symmetry <= SSIM_TOL
        && brute <= SSIM_TOL
        && sequence <= SSIM_TOL
        && bound <= 1.0 + SSIM_TOL
        && product_breaks;
    Outcome::new(
        pass,
        format!(
            "identity {identity:.1e}, symmetry {symmetry:.1e}, brute force {brute:.1e}, sequence mean {sequence:.1e} \
             (tol {SSIM_TOL:.0e}), max {bound:.4} <= 1, product-form ssim(x,x) = {product_identity:.4}"
        ),
    )
}

struct Baseline {
    path: PathBuf,
    steps: usize,
    median: f64,
    seconds: f64,
    cached: bool,
}

fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn fingerprint(spec: &WorldSpec, kind: ModelKind, opts: &TrainOptions) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(
        format!(
            "{kind:?} {opts:?} {:?} {:?}",
            ArchDescriptor::default(),
            CameraConfig::default()
        )
        .as_bytes(),
    );
    for f in tour_frames(&spec.without_anomalies(), opts.seed, 64).unwrap() {
        for v in f.data() {
            h.update(&v.to_bits().to_le_bytes());
        }
    }
    h.finalize()
}

fn read_sidecar(path: &Path) -> Option<(usize, f64, f64)> {
    let text = std::fs::read_to_string(path).ok()?;
    let get = |key: &str| {
        text.lines().find_map(|l| {
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
        })
    };
    Some((
        get("steps")?.parse().ok()?,
        get("median")?.parse().ok()?,
        get("seconds")?.parse().ok()?,
    ))
}

fn baseline(spec: &WorldSpec, kind: ModelKind) -> Baseline {
    let opts = TrainOptions::default();
    let dir = cache_dir();
    std::fs::create_dir_all(&dir).unwrap();
    let stem = format!("{}-{:08x}", kind, fingerprint(spec, kind, &opts));
    let path = dir.join(format!("{stem}.veme"));
    let sidecar = dir.join(format!("{stem}.txt"));
    let retrain = std::env::var_os("VEM_RETRAIN").is_some_and(|v| !v.is_empty() && v != "0");
    if !retrain && path.exists() {
        if let Some((steps, median, seconds)) = read_sidecar(&sidecar) {
            return Baseline {
                path,
                steps,
                median,
                seconds,
                cached: true,
            };
        }
    }
    let report = train_baseline(spec, kind, &opts, &path, &mut |step, median| {
        eprintln!("  {kind} step {step:>6}  held-out median SSIM {median:.4}");
    })
    .unwrap();
    std::fs::write(
        &sidecar,
        format!(
            "steps={}\nmedian={:.17e}\nseconds={:.3}\n",
            report.steps, report.held_out_median, report.seconds
        ),
    )
    .unwrap();
    Baseline {
        path,
        steps: report.steps,
        median: report.held_out_median,
        seconds: report.seconds,
        cached: false,
    }
}

/// Held-out median recomputed from the stored weights.
fn held_out_median(spec: &WorldSpec, path: &Path) -> f64 {
    let model: AutoencoderModel = load_weights(path).unwrap();
    let corpus = Corpus::build(spec, TrainOptions::default().seed, 64).unwrap();
    let cfg = SsimConfig::default();
    let mut scores: Vec<f64> = corpus
        .held_out
        .iter()
        .map(|w| ssim_sequence(w, &model.reconstruct(w).unwrap(), &cfg).unwrap())
        .collect();
    scores.sort_by(f64::total_cmp);
    let n = scores.len();
    if n % 2 == 1 {
        scores[n / 2]
    } else {
        0.5 * (scores[n / 2 - 1] + scores[n / 2])
    }
}

fn baseline_training(spec: &WorldSpec, lstm: &Baseline) -> Outcome {
    let opts = TrainOptions::default();
    let recomputed = held_out_median(spec, &lstm.path);
    let consistent = (recomputed - lstm.median).abs() < 1e-3;
    let pass = lstm.median >= opts.floor
        && lstm.steps <= opts.max_steps
        && lstm.seconds <= TRAIN_SECONDS
        && opts.learning_rate == 1e-4
        && consistent;
    let target = if lstm.median >= opts.target {
        "target met"
    } else {
        "below target, floor only"
    };
    Outcome::new(
        pass,
        format!(
            "held-out median SSIM {:.4} ({target}: {:.2} / floor {:.2}), {} steps <= {}, {:.0} s <= {TRAIN_SECONDS:.0} s, \
             recomputed {recomputed:.4}{}",
            lstm.median,
            opts.target,
            opts.floor,
            lstm.steps,
            opts.max_steps,
            lstm.seconds,
            if lstm.cached { ", cached weights" } else { "" }
        ),
    )
}

fn is_static(tag: RoomTag) -> bool {
    matches!(tag, RoomTag::Vegetation | RoomTag::StaticObjects)
}

fn anomaly_ordering(spec: &WorldSpec, lstm: &Baseline) -> Outcome {
    let model: AutoencoderModel = load_weights(&lstm.path).unwrap();
    let cfg = SsimConfig::default();
    let score = |w: &SequenceWindow| ssim_sequence(w, &model.reconstruct(w)?, &cfg);
    let ev = evaluate_rooms(spec, 42, EVAL_WINDOWS, EVAL_STRIDE, &score).unwrap();
    let empty = ev.summary(|t| t == RoomTag::Empty).unwrap();
    let stat = ev.summary(is_static).unwrap();
    let dynamic = ev.summary(RoomTag::is_dynamic).unwrap();
    let min_count = empty.count.min(stat.count).min(dynamic.count);
    let pass = empty.mean > stat.mean
        && stat.mean > dynamic.mean
        && empty.mean - dynamic.mean >= ORDER_MARGIN
        && dynamic.std > empty.std
        && dynamic.std > stat.std
        && min_count >= 50;
    let per_tag: Vec<String> = ev
        .per_tag()
        .iter()
        .map(|(t, s)| format!("{t} {:.3}", s.mean))
        .collect();
    Outcome::new(
        pass,
        format!(
            "empty {:.4}±{:.4} > static {:.4}±{:.4} > dynamic {:.4}±{:.4}, margin {:.4} >= {ORDER_MARGIN}, \
             >= {min_count} windows per type ({})",
            empty.mean,
            empty.std,
            stat.mean,
            stat.std,
            dynamic.mean,
            dynamic.std,
            empty.mean - dynamic.mean,
            per_tag.join(", ")
        ),
    )
}

fn study_config(condition: Condition, lstm: &Baseline, vae: &Baseline) -> ExperimentConfig {
    ExperimentConfig {
        condition,
        trials: STUDY_TRIALS,
        baseline_weights: Some(lstm.path.clone()),
        vae_weights: Some(vae.path.clone()),
        ..ExperimentConfig::default()
    }
}

struct Study {
    results: Vec<(Condition, ExperimentResult)>,
    seconds: f64,
}

impl Study {
    fn get(&self, c: Condition) -> &ExperimentResult {
        &self.results.iter().find(|(k, _)| *k == c).unwrap().1
    }
}

fn run_study(lstm: &Baseline, vae: &Baseline) -> Study {
    let start = Instant::now();
    let results = Condition::ALL
        .into_iter()
        .map(|c| {
            let setup = TrialSetup::load(&study_config(c, lstm, vae)).unwrap();
            (c, run_with_setup(&setup).unwrap())
        })
        .collect();
    Study {
        results,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn exploration_study(study: &Study) -> Outcome {
    let frac = |c| study.get(c).metrics.anomaly_fraction();
    let (lstm, frontier, vae) = (
        frac(Condition::LstmInference),
        frac(Condition::Frontier),
        frac(Condition::Vae),
    );
    let test = study
        .get(Condition::LstmInference)
        .metrics
        .test_against(&study.get(Condition::Frontier).metrics);
    let aborted: usize = study.results.iter().map(|(_, r)| r.metrics.aborted).sum();
    let pass = lstm >= LSTM_MIN_FRACTION
        && (FRONTIER_BAND.0..=FRONTIER_BAND.1).contains(&frontier)
        && lstm > vae
        && test.p_value < SIGNIFICANCE
        && study.seconds <= STUDY_SECONDS
        && aborted == 0;
    let counts: Vec<String> = study
        .results
        .iter()
        .map(|(c, r)| format!("{c} {}/{}", r.metrics.anomaly_rooms, r.metrics.rooms()))
        .collect();
    Outcome::new(
        pass,
        format!(
            "lstm_inference {lstm:.3} >= {LSTM_MIN_FRACTION}, frontier {frontier:.3} in [{}, {}], vae {vae:.3} < lstm, \
             z = {:.2}, p = {:.2e} < {SIGNIFICANCE}, {:.0} s <= {STUDY_SECONDS:.0} s, aborted {aborted} ({})",
            FRONTIER_BAND.0,
            FRONTIER_BAND.1,
            test.z,
            test.p_value,
            study.seconds,
            counts.join(", ")
        ),
    )
}

fn empty_reference(records: &[TrialRecord]) -> f64 {
    let scores: Vec<f64> = records
        .iter()
        .flat_map(|r| &r.windows)
        .filter(|w| w.tag == Some(RoomTag::Empty))
        .map(|w| w.score)
        .collect();
    scores.iter().sum::<f64>() / scores.len().max(1) as f64
}

fn forgetting_pattern(study: &Study, lstm: &Baseline, vae: &Baseline) -> Outcome {
    let reference = empty_reference(&study.get(Condition::LstmInference).records);
    let criteria = ForgettingCriteria::default();
    let mut records = study.get(Condition::LstmLearning).records.clone();
    let setup = TrialSetup::load(&study_config(Condition::LstmLearning, lstm, vae)).unwrap();
    let mut qualifying = Vec::new();
    let mut next = records.len();
    loop {
        for r in records.drain(..) {
            if let Ok(summary) = analyze_forgetting(&r, reference, &criteria) {
                if let Some(seq) = summary.first_sequence() {
                    qualifying.push((r.trial, seq.clone(), summary.visits.clone()));
                }
            }
        }
        if qualifying.len() >= FORGETTING_TRIALS || next >= FORGETTING_MAX_TRIALS {
            break;
        }
        records.push(run_trial(&setup, next).unwrap());
        next += 1;
    }
    qualifying.truncate(FORGETTING_TRIALS);
    let flagged = qualifying.iter().filter(|(_, s, _)| s.flagged).count();
    let pass = qualifying.len() == FORGETTING_TRIALS && flagged >= FORGETTING_FLAGGED;
    let shown: Vec<String> = qualifying
        .iter()
        .map(|(t, s, v)| {
            format!(
                "t{t} {:.3}/{:.3}/{:.3}{}",
                v[s.anomaly].mean,
                v[s.first_empty].mean,
                v[s.second_empty].mean,
                if s.flagged { "*" } else { "" }
            )
        })
        .collect();
    Outcome::new(
        pass,
        format!(
            "{flagged} of {} qualifying trials flagged (need {FORGETTING_FLAGGED} of {FORGETTING_TRIALS}, {next} trials run), \
             reference {reference:.4}; anomaly/empty/empty means: {}",
            qualifying.len(),
            shown.join(" ")
        ),
    )
}

fn oracle_exactness() -> Outcome {
    let checks: [(&str, fn()); 4] = [
        (
            "frontiers",
            common::frontiers_match_definition_on_random_grids,
        ),
        (
            "frontier invariants",
            common::frontier_members_satisfy_invariants,
        ),
        ("A* = BFS", common::astar_lengths_equal_bfs_on_random_grids),
        ("integration", common::integration_matches_slab_oracle),
    ];
    let mut failed = Vec::new();
    for (name, f) in checks {
        if catch_unwind(f).is_err() {
            failed.push(name);
        }
    }
    let detail = if failed.is_empty() {
        "frontier extraction on 50 random grids, A* vs BFS, integration vs ray-walk oracle all exact".to_string()
    } else {
        format!("mismatch in {}", failed.join(", "))
    };
    Outcome::new(failed.is_empty(), detail)
}

fn twin_contract(study: &Study, lstm: &Baseline) -> Outcome {
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicBool, Ordering};
    use std::sync::{Arc, Mutex};

    let channel = Arc::new(SnapshotChannel::new());
    let published = Arc::new(Mutex::new(HashMap::<u64, u32>::new()));
    let done = Arc::new(AtomicBool::new(false));
    let consumer = {
        let (channel, done) = (channel.clone(), done.clone());
        std::thread::spawn(move || {
            let mut twin = InferenceTwin::new(AutoencoderModel::build(small_arch(), 99).unwrap());
            let mut seen = Vec::new();
            loop {
                let finished = done.load(Ordering::Acquire);
                if let Some(s) = channel.latest() {
                    let ok = s.verify().is_ok() && param_checksum(s.params()) == s.checksum();
                    seen.push((s.version(), s.checksum(), ok));
                }
                twin.sync(&channel).unwrap();
                seen.push((
                    twin.version(),
                    param_checksum(&twin.model.flat_params()),
                    true,
                ));
                if finished {
                    break;
                }
                std::thread::yield_now();
            }
            seen
        })
    };
    let mut model = AutoencoderModel::build(small_arch(), 3).unwrap();
    let mut adam = model.new_optimizer(1e-2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..SNAPSHOT_VERSIONS {
        let w = random_window(&mut rng, 8);
        model.train_step(&w, &mut adam).unwrap();
        let v = channel.publish(&model);
        published
            .lock()
            .unwrap()
            .insert(v, param_checksum(&model.flat_params()));
    }
    done.store(true, Ordering::Release);
    let seen = consumer.join().unwrap();
    let published = published.lock().unwrap();
    let consumed: Vec<_> = seen.iter().filter(|(v, _, _)| *v > 0).collect();
    let torn = consumed
        .iter()
        .filter(|(v, c, ok)| !ok || published.get(v) != Some(c))
        .count();
    let distinct: std::collections::HashSet<u64> = consumed.iter().map(|(v, _, _)| *v).collect();

    let stored: AutoencoderModel = load_weights(&lstm.path).unwrap();
    let expected = param_checksum(&stored.flat_params());
    let inference = &study.get(Condition::LstmInference).records;
    let unchanged = inference
        .iter()
        .all(|r| r.weights_before == Some(expected) && r.weights_after == Some(expected));
    let pass =
        published.len() == SNAPSHOT_VERSIONS && !consumed.is_empty() && torn == 0 && unchanged;
    Outcome::new(
        pass,
        format!(
            "{} versions published, {} snapshots consumed ({} distinct versions), {torn} torn or unpublished; \
             {} inference trials keep checksum {expected:08x}: {unchanged}",
            published.len(),
            consumed.len(),
            distinct.len(),
            inference.len()
        ),
    )
}

fn run_cli(out: &Path, lstm: &Baseline, vae: &Baseline) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vem"))
        .args([
            "--seed",
            "42",
            "--set",
            "trials=3",
            "--set",
            "tick_budget=300",
            "run",
            "--condition",
            "all",
        ])
        .arg("--weights")
        .arg(&lstm.path)
        .arg("--vae-weights")
        .arg(&vae.path)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism(lstm: &Baseline, vae: &Baseline) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ra = run_cli(&a, lstm, vae);
    let rb = run_cli(&b, lstm, vae);
    if !ra.status.success() || !rb.status.success() {
        return Outcome::new(
            false,
            format!("vem run failed: {}", String::from_utf8_lossy(&ra.stderr)),
        );
    }
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    let bytes: usize = fa.iter().map(|(_, d)| d.len()).sum();
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let pass = !fa.is_empty() && fa.len() == fb.len() && differing.is_empty();
    Outcome::new(
        pass,
        format!(
            "two `vem --seed 42 run --condition all` invocations: {} CSV files, {bytes} bytes, differing {:?}",
            fa.len(),
            differing
        ),
    )
}

/// Supplementary: in a world without anomalies the novelty gate should rarely fire.
fn zero_anomaly_world(lstm: &Baseline, vae: &Baseline) -> String {
    let mut setup = TrialSetup::load(&study_config(Condition::LstmInference, lstm, vae)).unwrap();
    setup.spec = setup.spec.without_anomalies();
    let result = run_with_setup(&setup).unwrap();
    let windows: Vec<f64> = result
        .records
        .iter()
        .flat_map(|r| &r.windows)
        .map(|w| w.score)
        .collect();
    let fired = windows
        .iter()
        .filter(|&&s| s < setup.config.ssim_threshold)
        .count();
    let mean = windows.iter().sum::<f64>() / windows.len().max(1) as f64;
    format!(
        "{} trials, {} windows, mean SSIM {mean:.4}, {fired} below the {:.2} gate ({:.1}%)",
        result.records.len(),
        windows.len(),
        setup.config.ssim_threshold,
        100.0 * fired as f64 / windows.len().max(1) as f64
    )
}

fn vae_summary(spec: &WorldSpec, vae: &Baseline) -> String {
    let model: VaeModel = load_weights(&vae.path).unwrap();
    let corpus = Corpus::build(spec, TrainOptions::default().seed, 64).unwrap();
    let bonus: Vec<f64> = corpus
        .held_out
        .iter()
        .map(|w| window_bonus(&model, w).unwrap())
        .collect();
    format!(
        "held-out median SSIM {:.4}, {} steps, {:.0} s, mean held-out bonus {:.4}{}",
        vae.median,
        vae.steps,
        vae.seconds,
        bonus.iter().sum::<f64>() / bonus.len() as f64,
        if vae.cached { ", cached weights" } else { "" }
    )
}

fn main() -> ExitCode {
    let spec = WorldSpec::default_map();
    let mut passed = 0;
    passed += report("1", "gradient integrity", gradient_integrity);
    passed += report("2", "SSIM correctness", ssim_correctness);

    let lstm = baseline(&spec, ModelKind::Lstm);
    let vae = baseline(&spec, ModelKind::Vae);
    passed += report("3", "baseline training", || baseline_training(&spec, &lstm));
    println!("supplement VAE baseline: {}", vae_summary(&spec, &vae));
    passed += report("4", "anomaly discrimination ordering", || {
        anomaly_ordering(&spec, &lstm)
    });

    let study = run_study(&lstm, &vae);
    passed += report("5", "exploration study", || exploration_study(&study));
    passed += report("6", "forgetting pattern", || {
        forgetting_pattern(&study, &lstm, &vae)
    });
    passed += report("7", "oracle exactness", oracle_exactness);
    passed += report("8", "twin-model contract", || twin_contract(&study, &lstm));
    passed += report("9", "determinism", || determinism(&lstm, &vae));
    println!(
        "supplement zero-anomaly world: {}",
        zero_anomaly_world(&lstm, &vae)
    );

    println!("acceptance: {passed} of 9 criteria passed");
    let strict = std::env::var_os("VEM_STRICT").is_some_and(|v| v != "0");
    if strict && passed < 9 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
