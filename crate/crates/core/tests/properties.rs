use framedup::attack::{detect_motion, MotionParams};
use framedup::detect::{slide, DetectorParams, ReferenceDb, Verdict};
use framedup::extract::{estimate_enf_audio, ExtractedEnf, ExtractionParams};
use framedup::media::{into_blocks, read_wav, Frame, FseqHeader, FseqReader, FseqWriter, WavWriter};
use framedup::signal::{dft, enf_phase, idft, pearson, synth_enf, EnfSeries, GridParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn synthesized_enf_stays_in_band(seed in any::<u64>(), fifty in any::<bool>()) {
        let params = if fifty { GridParams::with_nominal(50.0) } else { GridParams::default() };
        let s = synth_enf(&params, 300.0, seed).unwrap();
        let (lo, hi) = (params.f_nominal - params.deviation_bound, params.f_nominal + params.deviation_bound);
        for &v in &s.values {
            prop_assert!(v >= lo && v <= hi, "{v} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn dft_round_trip(x in prop::collection::vec(-1e3f64..1e3, 1..600)) {
        let back = idft(&dft(&x).unwrap());
        let tol = 1e-9 * x.len() as f64;
        prop_assert_eq!(back.len(), x.len());
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn pearson_is_affine_invariant(
        xy in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..200),
        a in 0.1f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let Ok(r) = pearson(&x, &y) else { return Ok(()); };
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let r2 = pearson(&ax, &y).unwrap();
        prop_assert!((r - r2).abs() < 1e-12, "{r} vs {r2}");
    }

    #[test]
    fn phase_is_non_decreasing(
        values in prop::collection::vec(0.5f64..100.0, 2..60),
        rate in prop::sample::select(vec![0.5, 1.0, 4.0]),
        start in -10.0f64..10.0,
        mut fractions in prop::collection::vec(0.0f64..=1.0, 2..40),
    ) {
        let s = EnfSeries::new(start, rate, values).unwrap();
        fractions.sort_by(f64::total_cmp);
        let span = s.end_time() - start;
        let mut last = f64::NEG_INFINITY;
        for f in fractions {
            let p = enf_phase(&s, start + f * span).unwrap();
            prop_assert!(p >= last, "{p} < {last}");
            last = p;
        }
    }

    #[test]
    fn motion_threshold_is_strict(seed in any::<u64>(), w in 1u32..40, h in 1u32..40) {
        let params = MotionParams::default();
        let t = params.pixel_delta_threshold;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px: Vec<u8> = (0..w * h).map(|_| rng.random_range(0..=(254 - t))).collect();
        let prev = Frame::new(0, w, h, 0, 1, px.clone()).unwrap();
        let at = Frame::new(1, w, h, 1, 1, px.iter().map(|p| p + t).collect()).unwrap();
        let over = Frame::new(1, w, h, 1, 1, px.iter().map(|p| p + t + 1).collect()).unwrap();
        let r = detect_motion(&prev, &at, &params).unwrap();
        prop_assert!(!r.motion);
        prop_assert_eq!(r.changed_count, 0);
        let r = detect_motion(&prev, &over, &params).unwrap();
        prop_assert!(r.motion);
        prop_assert_eq!(r.changed_count, (w * h) as usize);
    }
}

/// Tone plus noise at `freq`, `secs` long at 8 kHz.
fn noisy_tone(seed: u64, freq: f64, secs: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = 8000.0;
    (0..(secs * sr) as usize)
        .map(|i| {
            let t = i as f64 / sr;
            0.1 * (2.0 * std::f64::consts::PI * freq * t).sin() + rng.random_range(-0.02..0.02)
        })
        .collect()
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn estimator_is_amplitude_invariant(seed in any::<u64>(), freq in 59.97f64..60.03, scale in 0.01f64..100.0) {
        let x = noisy_tone(seed, freq, 12.0);
        let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let params = ExtractionParams::audio(60.0);
        let run = |v: Vec<f64>| estimate_enf_audio(into_blocks(8000, v, 2048).into_iter().map(Ok), &params).unwrap();
        let (a, b) = (run(x), run(scaled));
        let (lo, hi) = params.band();
        prop_assert_eq!(a.series.len(), b.series.len());
        for (u, v) in a.series.values.iter().zip(&b.series.values) {
            prop_assert!((u - v).abs() <= 1e-9, "{u} vs {v}");
            prop_assert!(*u >= lo && *u <= hi);
        }
    }
}

fn walk(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = 0.0;
    (0..n)
        .map(|_| {
            v = (v + rng.random_range(-0.004..0.004f64)).clamp(-0.02, 0.02);
            60.0 + v
        })
        .collect()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn verdicts_survive_positive_affine_maps(
        seed in any::<u64>(),
        mix in 0.0f64..1.0,
        a in 0.2f64..5.0,
        b in -0.05f64..0.05,
    ) {
        let n = 120;
        let reference = walk(seed, n);
        let other = walk(seed ^ 0xABCD, n);
        // Blend toward an unrelated walk so verdicts land on both sides.
        let x: Vec<f64> = reference.iter().zip(&other).map(|(r, o)| (1.0 - mix) * r + mix * o).collect();
        let db = ReferenceDb::new(EnfSeries::new(0.0, 1.0, reference).unwrap());
        let params = DetectorParams::default();
        let ext = |v: Vec<f64>| ExtractedEnf {
            series: EnfSeries::new(0.0, 1.0, v).unwrap(),
            confidence: vec![1.0; n],
        };
        // Scaling about the nominal keeps the deviation series an affine map.
        let y: Vec<f64> = x.iter().map(|v| 60.0 + a * (v - 60.0) + b).collect();
        let w0 = slide(&ext(x), &db, &params, 60.0).unwrap();
        let w1 = slide(&ext(y), &db, &params, 60.0).unwrap();
        prop_assert_eq!(w0.len(), w1.len());
        for (p, q) in w0.iter().zip(&w1) {
            if let (Some(r0), Some(r1)) = (p.rho, q.rho) {
                prop_assert!((r0 - r1).abs() < 1e-9);
                if (r0 - params.rho_threshold).abs() < 1e-9 {
                    continue;
                }
            }
            prop_assert_eq!(p.verdict, q.verdict);
        }
    }

    #[test]
    fn all_low_confidence_windows_are_indeterminate(seed in any::<u64>(), low in 0.0f64..0.3) {
        let n = 60;
        let db = ReferenceDb::new(EnfSeries::new(0.0, 1.0, walk(seed, n)).unwrap());
        let e = ExtractedEnf {
            series: EnfSeries::new(0.0, 1.0, walk(seed.wrapping_add(1), n)).unwrap(),
            confidence: vec![low; n],
        };
        let w = slide(&e, &db, &DetectorParams::default(), 60.0).unwrap();
        prop_assert!(!w.is_empty());
        prop_assert!(w.iter().all(|w| w.verdict == Verdict::Indeterminate));
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn fseq_round_trip(seed in any::<u64>(), w in 1u32..24, h in 1u32..24, n in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.fseq");
        let header = FseqHeader {
            width: w,
            height: h,
            fps_numerator: 30,
            fps_denominator: 1,
            frame_count: 0,
            row_readout_ns: 1000,
        };
        let frames: Vec<Frame> = (0..n as u64)
            .map(|i| {
                let px = (0..w * h).map(|_| rng.random()).collect();
                Frame::new(i, w, h, i * 33_333_333 + rng.random_range(0..1000), 1000, px).unwrap()
            })
            .collect();
        let mut wr = FseqWriter::create(&path, header).unwrap();
        for f in &frames {
            wr.write_frame(f).unwrap();
        }
        prop_assert_eq!(wr.finish().unwrap().frame_count, n as u64);
        let back: Vec<Frame> = FseqReader::open(&path).unwrap().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, frames);
    }

    #[test]
    fn wav_round_trip(samples in prop::collection::vec(any::<i16>(), 0..4000)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let x: Vec<f64> = samples.iter().map(|&s| framedup::media::wav::dequantize(s)).collect();
        let mut w = WavWriter::create(&path, 8000).unwrap();
        w.write_samples(&x).unwrap();
        prop_assert_eq!(w.finish().unwrap(), x.len() as u64);
        let (sr, back) = read_wav(&path).unwrap();
        prop_assert_eq!(sr, 8000);
        prop_assert_eq!(back, x);
    }
}

#[test]
fn identical_inputs_give_identical_windows() {
    let db = ReferenceDb::new(EnfSeries::new(0.0, 1.0, walk(3, 200)).unwrap());
    let e = ExtractedEnf {
        series: EnfSeries::new(0.0, 1.0, walk(4, 200)).unwrap(),
        confidence: vec![0.9; 200],
    };
    let p = DetectorParams::default();
    assert_eq!(slide(&e, &db, &p, 60.0).unwrap(), slide(&e, &db, &p, 60.0).unwrap());
}
