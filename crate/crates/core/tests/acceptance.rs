//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! Runs as a plain binary so the report is printed even when every
//! criterion passes.

use std::collections::HashSet;
use std::time::Instant;

use framedup::attack::{
    detect_motion, run_attack_stream, AttackSink, AttackState, BlurParams, ClipPolicy, GaussianBlur, Mode,
    MotionParams, StaticClip, StepInput, StreamInfo,
};
use framedup::detect::{localize, roc_sweep, DetectorParams, ReferenceDb, SlidingDetector, Verdict, WindowLabel};
use framedup::extract::{estimate_enf_video, AudioEnfEstimator, ExtractedEnf};
use framedup::harness::{corpus, evaluate, run_all, ExperimentConfig};
use framedup::media::{render_audio, render_frames, AudioBlock, CameraParams, Event, Frame, SceneScript};
use framedup::signal::{dft, pearson, rmse, synth_enf, EnfSeries, GridParams};
use framedup::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

// 1. Parameter fidelity, checked on the serialized default config.
fn parameter_fidelity() -> Result<Outcome> {
    let dump = ExperimentConfig::default().to_toml();
    let v: toml::Value = toml::from_str(&dump).expect("config dump parses");
    let get = |path: &[&str]| {
        path.iter()
            .try_fold(&v, |node, key| node.get(key))
            .unwrap_or_else(|| panic!("missing key {}", path.join(".")))
            .clone()
    };
    let num = |path: &[&str]| {
        let x = get(path);
        x.as_float().or_else(|| x.as_integer().map(|i| i as f64)).expect("numeric")
    };
    let checks = [
        ("attack.blur.kernel_size", num(&["attack", "blur", "kernel_size"]), 21.0),
        (
            "attack.motion.pixel_delta_threshold",
            num(&["attack", "motion", "pixel_delta_threshold"]),
            10.0,
        ),
        (
            "attack.motion.changed_fraction_threshold",
            num(&["attack", "motion", "changed_fraction_threshold"]),
            0.005,
        ),
        ("grid.f_nominal", num(&["grid", "f_nominal"]), 60.0),
        ("grid.deviation_bound", num(&["grid", "deviation_bound"]), 0.02),
    ];
    let mut bad: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(k, got, want)| format!("{k}={got} (want {want})"))
        .collect();

    let fifty = ExperimentConfig::from_toml("schema_version = 1\n[grid]\nf_nominal = 50.0\n")?;
    fifty.validate()?;
    let (lo, hi) = fifty.audio_params().band();
    if ((lo + hi) / 2.0 - 50.0).abs() > 1e-12 || fifty.attack_params().noise.nominal != 50.0 {
        bad.push(format!("50 Hz grid not applied: band ({lo}, {hi})"));
    }
    let series = synth_enf(&fifty.grid, 300.0, 7)?;
    if series.values.iter().any(|&f| (f - 50.0).abs() > 0.02) {
        bad.push("50 Hz walk leaves its band".into());
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            "kernel 21, delta 10, fraction 0.5%, 60 Hz nominal (50 Hz selectable), band 0.02 Hz".into()
        } else {
            bad.join("; ")
        },
    )
}

/// Direct O(k^2) Gaussian convolution with edge replication.
fn blur_oracle(frame: &Frame, k: usize, sigma: f64) -> Vec<f64> {
    let r = (k / 2) as i64;
    let mut weights = Vec::new();
    let mut total = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let w = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            weights.push((dx, dy, w));
            total += w;
        }
    }
    let (w, h) = (frame.width as i64, frame.height as i64);
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = weights
                .iter()
                .map(|&(dx, dy, wt)| {
                    let sx = (x + dx).clamp(0, w - 1);
                    let sy = (y + dy).clamp(0, h - 1);
                    wt * frame.pixels[(sy * w + sx) as usize] as f64
                })
                .sum();
            out.push(acc / total);
        }
    }
    out
}

// 2. Oracle equivalence of the numeric kernels.
fn oracle_equivalence() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = BlurParams::default();
    let mut blur = GaussianBlur::new(&params)?;
    let mut blur_err = 0.0f64;
    for i in 0..50 {
        let (w, h) = (rng.random_range(21..=64u32), rng.random_range(21..=48u32));
        let px = (0..w * h).map(|_| rng.random()).collect();
        let f = Frame::new(i, w, h, 0, 1, px)?;
        let got = blur.blur(&f)?;
        let want = blur_oracle(&f, params.kernel_size as usize, params.sigma());
        for (g, o) in got.pixels.iter().zip(&want) {
            blur_err = blur_err.max((*g as f64 - o).abs());
        }
    }

    let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fast = dft(&x)?;
    let n = x.len();
    let mut dft_err = 0.0f64;
    for k in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            let a = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
            re += v * a.cos();
            im += v * a.sin();
        }
        let d = fast.bin_values[k] - Complex64::new(re, im);
        dft_err = dft_err.max(d.norm());
    }

    // Raw-sum formula on the worked example, two-pass formula on random data.
    let raw = |x: &[f64], y: &[f64]| {
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
    };
    let centered = |x: &[f64], y: &[f64]| {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let c: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        c / (vx * vy).sqrt()
    };
    let mut p_err = (pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.1])?
        - raw(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.1]))
    .abs();
    for _ in 0..200 {
        let len = rng.random_range(3..500);
        let a: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v * 0.5 + rng.random_range(-1.0..1.0)).collect();
        p_err = p_err.max((pearson(&a, &b)? - centered(&a, &b)).abs());
    }

    let pass = blur_err <= 1.0 && dft_err < 1e-7 && p_err < 1e-12;
    outcome(
        pass,
        format!("blur max |err| {blur_err:.3} level (<= 1), dft {dft_err:.2e} (< 1e-7), pearson {p_err:.2e} (< 1e-12)"),
    )
}

fn tagged(i: u64, motion: bool, noise: bool, trigger: bool, manual: bool) -> Result<StepInput> {
    Ok(StepInput {
        time: i as f64,
        frame: Frame::new(i, 2, 1, i * 1_000_000_000, 1, vec![i as u8, motion as u8])?,
        audio: vec![noise as u8 as f64; 3],
        motion,
        noise,
        trigger,
        manual,
    })
}

fn clip_is_pure(c: &StaticClip) -> bool {
    c.frames.iter().all(|f| f.pixels[1] == 0) && c.audio.iter().flatten().all(|&x| x == 0.0)
}

// 3. FSM safety by exhaustive enumeration, plus light-toggle sensitivity.
fn fsm_behavior() -> Result<Outcome> {
    let policy = ClipPolicy {
        min_frames: 2,
        max_frames: 3,
        refresh_interval: 3.0,
        cooldown: 2.0,
    };
    // (motion, noise, trigger, manual)
    let alphabet = [
        (false, false, false, false),
        (true, false, false, false),
        (false, true, false, false),
        (false, false, true, false),
        (true, false, true, false),
        (false, false, false, true),
    ];
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    let mut stack = vec![(AttackState::new(), 0u64, false)];
    let (mut entries, mut transitions) = (0usize, 0usize);
    while let Some((state, i, fired_before)) = stack.pop() {
        if i == 12 {
            continue;
        }
        for &(motion, noise, trigger, manual) in &alphabet {
            let mut next = state.clone();
            let out = next.step(tagged(i, motion, noise, trigger, manual)?, &policy);
            transitions += 1;
            let fired = fired_before || trigger || manual;
            if next.mode == Mode::Replaying && state.mode != Mode::Replaying {
                entries += 1;
                if !fired {
                    violations.push(format!("step {i}: replay without trigger"));
                }
                if motion || noise {
                    violations.push(format!("step {i}: replay during motion or noise"));
                }
                if !state.clip().is_some_and(|c| c.complete && c.len() >= policy.min_frames) {
                    violations.push(format!("step {i}: replay without a complete clip"));
                }
            }
            if out.replayed && out.frame.pixels[1] != 0 {
                violations.push(format!("step {i}: replayed a frame captured during motion"));
            }
            if !next.clip().into_iter().chain(next.recording()).all(clip_is_pure) {
                violations.push(format!("step {i}: clip holds motion or noise"));
            }
            let idle = matches!(next.mode, Mode::Monitoring | Mode::RecordingStatic);
            let flag = fired && !idle;
            if seen.insert((next.state_key(i as f64, &policy), flag)) {
                stack.push((next, i + 1, flag));
            }
        }
    }

    let cam = CameraParams::default();
    let mparams = MotionParams::default();
    let mut blur = GaussianBlur::new(&BlurParams::default())?;
    let mut missed = Vec::new();
    let levels = [(128.0, 170.0), (170.0, 128.0), (128.0, 100.0), (128.0, 140.0), (40.0, 230.0)];
    for (k, &(from, to)) in levels.iter().enumerate() {
        let at = 1.0 + 0.011 * k as f64;
        let script = SceneScript {
            base_level: from,
            ..SceneScript::new(2.0)
        }
        .with_event(Event::LightToggle { time: at, new_level: to });
        let enf = synth_enf(&GridParams::default(), 3.0, k as u64)?;
        let frames: Vec<Frame> = render_frames(&script, &enf, &cam, 40 + k as u64)?
            .map(|f| blur.blur(&f))
            .collect::<Result<_>>()?;
        let mut hit = false;
        for p in frames.windows(2) {
            hit |= detect_motion(&p[0], &p[1], &mparams)?.motion;
        }
        if !hit {
            missed.push(format!("{from}->{to}"));
        }
    }
    let pass = violations.is_empty() && missed.is_empty() && entries > 0;
    outcome(
        pass,
        format!(
            "{transitions} transitions, {entries} replay entries, {} violations; {} of {} light toggles seen as motion{}",
            violations.len(),
            levels.len() - missed.len(),
            levels.len(),
            violations.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    )
}

fn truth_rmse(est: &ExtractedEnf, truth: &EnfSeries) -> f64 {
    let s = &est.series;
    let want: Vec<f64> = (0..s.len())
        .map(|i| truth.value_at(s.time_at(i)).expect("truth covers estimate"))
        .collect();
    rmse(&s.values, &want)
}

// 4. ENF round trip over ten seeds of five minutes each.
fn enf_round_trip() -> Result<Outcome> {
    let cfg = ExperimentConfig::default();
    let cam = &cfg.camera;
    let script = SceneScript::new(300.0);
    let (mut worst_a, mut worst_v) = (0.0f64, 0.0f64);
    for seed in 0..10u64 {
        let enf = synth_enf(&cfg.grid, 301.0, 1000 + seed)?;
        let mut audio = AudioEnfEstimator::new(&cfg.audio_params(), cam.audio_sample_rate)?;
        for block in render_audio(&script, &enf, cam, 2000 + seed)? {
            audio.push(&block)?;
        }
        let audio = audio.finish()?;
        let video = estimate_enf_video(
            render_frames(&script, &enf, cam, 2000 + seed)?.map(Ok),
            &cfg.video_params(),
            cam.fps_numerator,
            cam.fps_denominator,
        )?;
        worst_a = worst_a.max(truth_rmse(&audio, &enf));
        worst_v = worst_v.max(truth_rmse(&video, &enf));
    }
    outcome(
        worst_a <= 0.005 && worst_v <= 0.01,
        format!("worst audio RMSE {worst_a:.5} Hz (<= 0.005), worst video RMSE {worst_v:.5} Hz (<= 0.01)"),
    )
}

// 5. End-to-end detection on ten clean and ten attacked scenarios.
fn end_to_end() -> Result<Outcome> {
    let cfg = ExperimentConfig::default();
    let tolerance = (cfg.detector.window_len + cfg.detector.hop) as f64;
    let (mut neg, mut fp) = (0usize, 0usize);
    let mut problems = Vec::new();
    let mut rows = Vec::new();
    let mut worst_onset = 0.0f64;
    let mut youngest_clip = f64::INFINITY;
    for s in corpus::corpus(10, 10) {
        let e = evaluate(&cfg, &s)?;
        let labels = e.labels(&cfg);
        rows.push(e.merged.iter().map(|w| w.rho).zip(labels).collect::<Vec<_>>());
        if !s.attacked {
            neg += e.merged.len();
            fp += e.merged.iter().filter(|w| w.verdict == Verdict::Tampered).count();
            continue;
        }
        let replays = e.replay_intervals();
        let Some(&(start, _)) = replays.first() else {
            problems.push(format!("{}: attack never replayed", s.name));
            continue;
        };
        for span in &e.timeline.replays {
            let (t, _) = e.timeline.span_seconds(span);
            youngest_clip = youngest_clip.min(t - span.clip_recorded_at);
        }
        if !e.merged.iter().any(|w| w.verdict == Verdict::Tampered) {
            problems.push(format!("{}: not flagged", s.name));
            continue;
        }
        let onset = localize(&e.merged)
            .iter()
            .map(|&(on, _)| on)
            .min_by(|a, b| (a - start).abs().total_cmp(&(b - start).abs()))
            .unwrap_or(f64::INFINITY);
        worst_onset = worst_onset.max((onset - start).abs());
        if (onset - start).abs() > tolerance {
            problems.push(format!("{}: onset {onset} vs splice {start:.2}", s.name));
        }
    }
    let fpr = fp as f64 / neg.max(1) as f64;
    let roc = roc_sweep(&rows, &[cfg.detector.rho_threshold])?;
    let positives = rows.iter().flatten().filter(|(_, l)| *l == WindowLabel::Positive).count();
    let pass = fpr <= 0.05 && problems.is_empty() && youngest_clip >= 60.0;
    outcome(
        pass,
        format!(
            "clean FPR {fpr:.3} ({fp}/{neg}, <= 0.05), attacked flagged {}/10, worst onset error {worst_onset:.1} s (<= {tolerance}), \
             youngest clip at splice {youngest_clip:.1} s (>= 60), window TPR {:.3} over {positives}{}",
            10 - problems.iter().filter(|p| p.contains("not flagged") || p.contains("never")).count(),
            roc[0].true_positive_rate,
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

struct CountingSink {
    frames: u64,
}

impl AttackSink for CountingSink {
    fn frame(&mut self, _frame: Frame, _audio: &[f64], _replayed: bool) -> Result<()> {
        self.frames += 1;
        Ok(())
    }

    fn audio_tail(&mut self, _audio: &[f64]) -> Result<()> {
        Ok(())
    }
}

// 6. Attack throughput and detector emission latency.
fn real_time() -> Result<Outcome> {
    let cfg = ExperimentConfig::default();
    let cam = &cfg.camera;
    let duration = 60.0;
    let script = SceneScript::new(duration)
        .with_event(Event::Motion {
            start: 10.0,
            end: 25.0,
            object_size_px: 48,
            velocity_px_per_s: 120.0,
        })
        .with_event(Event::TriggerAppearance {
            start: 20.0,
            end: 45.0,
            position_px: [200, 20],
        });
    let enf = synth_enf(&cfg.grid, duration + 1.0, 5)?;
    let frames: Vec<Frame> = render_frames(&script, &enf, cam, 6)?.collect();
    let audio: Vec<AudioBlock> = render_audio(&script, &enf, cam, 6)?.collect();
    let info = StreamInfo {
        width: cam.width,
        height: cam.height,
        fps_numerator: cam.fps_numerator,
        fps_denominator: cam.fps_denominator,
        sample_rate: cam.audio_sample_rate,
    };
    let mut sink = CountingSink { frames: 0 };
    let t = Instant::now();
    let summary = run_attack_stream(
        &cfg.attack_params(),
        info,
        frames.into_iter().map(Ok),
        audio.iter().cloned().map(Ok),
        &[],
        &mut sink,
    )?;
    let speed = duration / t.elapsed().as_secs_f64();
    let replayed = !summary.timeline.replays.is_empty();

    // Feed audio in small blocks and note, per window, how much media had
    // arrived when it was emitted versus when its last estimate existed.
    let params = cfg.audio_params();
    let mut est = AudioEnfEstimator::new(&params, cam.audio_sample_rate)?;
    let det_params = DetectorParams::default();
    let mut det = SlidingDetector::new(det_params.clone(), ReferenceDb::new(enf.clone()), cfg.grid.f_nominal, 1.0)?;
    let samples: Vec<f64> = audio.into_iter().flat_map(|b| b.samples).collect();
    let sr = cam.audio_sample_rate as f64;
    let block = (sr / 8.0) as usize;
    let (frame_s, hop_s) = (params.stft_frame, params.stft_hop);
    let mut emitted = 0u64;
    let mut worst_lag = 0.0f64;
    let mut offset = 0u64;
    for chunk in samples.chunks(block) {
        let b = AudioBlock {
            sample_rate: cam.audio_sample_rate,
            start_offset: offset,
            samples: chunk.to_vec(),
        };
        offset += chunk.len() as u64;
        let now = offset as f64 / sr;
        for p in est.push(&b)?.to_vec() {
            if det.push(p.time, p.freq, p.confidence).is_some() {
                // Window i needs estimates up to index i*hop + len - 1.
                let last = emitted * det_params.hop as u64 + det_params.window_len as u64 - 1;
                let available = last as f64 * hop_s + frame_s;
                worst_lag = worst_lag.max(now - available);
                emitted += 1;
            }
        }
    }
    let hop_seconds = det_params.hop as f64 * hop_s;
    let pass = speed >= 2.0 && worst_lag <= hop_seconds && replayed && emitted > 0;
    outcome(
        pass,
        format!(
            "attack at {speed:.1}x real time on {} core(s) (>= 2x), {emitted} windows emitted at most {worst_lag:.3} s after their data (<= {hop_seconds} s)",
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        ),
    )
}

// 7. Two identical run_all invocations.
fn reproducibility() -> Result<Outcome> {
    let dir = tempfile::tempdir().expect("temp dir");
    let script = SceneScript::new(70.0)
        .with_event(Event::Motion {
            start: 15.0,
            end: 30.0,
            object_size_px: 48,
            velocity_px_per_s: 120.0,
        })
        .with_event(Event::TriggerAppearance {
            start: 25.0,
            end: 50.0,
            position_px: [200, 20],
        });
    std::fs::write(dir.path().join("scene.toml"), script.to_toml()).expect("scene written");
    let cfg = ExperimentConfig {
        scene: Some("scene.toml".into()),
        base_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let snapshot = |m: &framedup::harness::RunManifest| -> Vec<(String, Vec<u8>)> {
        m.artifacts
            .iter()
            .filter(|a| a.path.extension().is_some_and(|e| e != "json"))
            .map(|a| (a.path.display().to_string(), std::fs::read(&a.path).expect("artifact")))
            .collect()
    };
    let first = snapshot(&run_all(&cfg)?);
    let second = snapshot(&run_all(&cfg)?);
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.rsplit('/').next().unwrap_or(&a.0))
        .collect();
    outcome(
        first.len() == second.len() && differing.is_empty(),
        format!(
            "{} media/CSV artifacts compared byte for byte, {} differ{}",
            first.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {}", differing.join(", ")) }
        ),
    )
}

type Criterion = (&'static str, fn() -> Result<Outcome>, f64);

fn main() {
    // libtest-style filters are ignored; `--list` must print nothing.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 7] = [
        ("parameter fidelity", parameter_fidelity, f64::INFINITY),
        ("oracle equivalence", oracle_equivalence, 10.0),
        ("FSM behavior", fsm_behavior, 60.0),
        ("ENF round trip", enf_round_trip, 300.0),
        ("end-to-end detection", end_to_end, 900.0),
        ("real-time capability", real_time, f64::INFINITY),
        ("reproducibility", reproducibility, f64::INFINITY),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let result = run();
        let secs = t.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && secs < budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let limit = if budget.is_finite() { format!(", limit {budget:.0} s") } else { String::new() };
        println!(
            "criterion {} {}: {name}: {detail} [{secs:.1} s{limit}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" }
        );
        failed += !pass as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 7 acceptance criteria passed");
}
