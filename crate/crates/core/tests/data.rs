use std::collections::BTreeMap;

use ndarray::Array3;
use p300::data::*;
use proptest::prelude::*;

fn tiny_set() -> EpochSet {
    EpochSet {
        data: Array3::from_shape_fn((2, 3, 4), |(e, c, s)| (e * 100 + c * 10 + s) as f64 * 0.5 - 3.0),
        labels: vec![1, 0],
        char_ids: vec![7, 29],
        trial_ids: vec![3, 3],
        subject_ids: vec![2, 2],
        onsets: vec![-5, 123_456_789_012],
        sampling_rate: 25.0,
    }
}

/// Byte-by-byte reader written against the layout description only.
fn parse_by_hand(b: &[u8]) -> (Vec<(u8, u16, u32, u16, i64)>, Vec<f32>, [u32; 4], f32) {
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
    assert_eq!(&b[..4], b"P3EP");
    let header = [u32_at(4), u32_at(8), u32_at(12), u32_at(16)];
    let fs = f32::from_le_bytes(b[20..24].try_into().unwrap());
    let n = header[1] as usize;
    let mut o = 24;
    let mut records = Vec::new();
    for _ in 0..n {
        let label = b[o];
        let ch = u16::from_le_bytes(b[o + 1..o + 3].try_into().unwrap());
        let trial = u32::from_le_bytes(b[o + 3..o + 7].try_into().unwrap());
        let subj = u16::from_le_bytes(b[o + 7..o + 9].try_into().unwrap());
        let onset = i64::from_le_bytes(b[o + 9..o + 17].try_into().unwrap());
        records.push((label, ch, trial, subj, onset));
        o += 17;
    }
    let values = b[o..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    (records, values, header, fs)
}

#[test]
fn container_layout_by_byte_count() {
    let e = tiny_set();
    let mut buf = Vec::new();
    write_epochs(&mut buf, &e).unwrap();
    // header 24 + 2 records of 17 + 2·3·4 f32 values
    assert_eq!(buf.len(), 24 + 2 * 17 + 2 * 3 * 4 * 4);
    assert_eq!(buf.len(), 154);
    let (records, values, header, fs) = parse_by_hand(&buf);
    assert_eq!(header, [1, 2, 3, 4]);
    assert_eq!(fs, 25.0);
    assert_eq!(records[0], (1, 7, 3, 2, -5));
    assert_eq!(records[1], (0, 29, 3, 2, 123_456_789_012));
    let expected: Vec<f32> = e.data.iter().map(|&v| v as f32).collect();
    assert_eq!(values, expected);
    assert_eq!(values[12 + 2 * 4 + 3], (100 + 20 + 3) as f32 * 0.5 - 3.0);
}

#[test]
fn container_file_round_trip_is_quantized() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.p3ep");
    let mut e = tiny_set();
    e.data[[0, 0, 0]] = 0.1;
    save_epochs(&e, &path).unwrap();
    let back = load_epochs(&path).unwrap();
    let mut q = e.clone();
    q.quantize_f32();
    assert_eq!(back, q);
    assert_ne!(back.data[[0, 0, 0]], 0.1);
}

fn small_config(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_subjects: 2,
        n_channels: 6,
        n_chars: 8,
        n_trials_per_subject: 10,
        n_repetitions: 3,
        p300: P300Config {
            amplitude: 2.0,
            channels: vec![2, 3],
            ..P300Config::default()
        },
        seed,
        ..SyntheticConfig::default()
    }
}

#[test]
fn grand_average_difference_peaks_inside_the_bump() {
    let cfg = small_config(5);
    let p = &cfg.p300;
    for rec in generate_synthetic(&cfg).unwrap() {
        let fs = rec.sampling_rate;
        let lead = (0.2 * fs) as usize;
        let len = fs as usize;
        for &ch in &p.channels {
            let mut sums = [vec![0.0; len], vec![0.0; len]];
            let mut counts = [0usize; 2];
            for ev in &rec.events {
                let k = ev.is_target as usize;
                counts[k] += 1;
                for (j, s) in sums[k].iter_mut().enumerate() {
                    *s += rec.signal[[ch, ev.onset_sample - lead + j]];
                }
            }
            let diff: Vec<f64> = (0..len)
                .map(|j| sums[1][j] / counts[1] as f64 - sums[0][j] / counts[0] as f64)
                .collect();
            let peak = (0..len).max_by(|&a, &b| diff[a].total_cmp(&diff[b])).unwrap();
            let t = peak as f64 * 1000.0 / fs - 200.0;
            assert!(
                (t - p.latency_ms).abs() <= p.width_ms / 2.0,
                "{} channel {ch}: peak at {t} ms",
                rec.subject_id
            );
        }
    }
}

#[test]
fn every_presentation_sequence_has_one_target_of_every_character() {
    let cfg = small_config(1);
    for rec in generate_synthetic(&cfg).unwrap() {
        let mut by_trial: BTreeMap<u32, Vec<(u16, bool)>> = BTreeMap::new();
        for ev in &rec.events {
            by_trial.entry(ev.trial_id).or_default().push((ev.char_id, ev.is_target));
        }
        assert_eq!(by_trial.len(), cfg.n_trials_per_subject * cfg.n_repetitions);
        for (trial, evs) in &by_trial {
            let mut chars: Vec<u16> = evs.iter().map(|e| e.0).collect();
            chars.sort();
            assert_eq!(chars, (0..cfg.n_chars as u16).collect::<Vec<_>>());
            assert_eq!(evs.iter().filter(|e| e.1).count(), 1, "trial {trial}");
        }
        // repetitions of one spelled character share the target
        for set in 0..cfg.n_trials_per_subject as u32 {
            let targets: Vec<u16> = (0..cfg.n_repetitions as u32)
                .map(|r| {
                    by_trial[&(set * cfg.n_repetitions as u32 + r)]
                        .iter()
                        .find(|e| e.1)
                        .unwrap()
                        .0
                })
                .collect();
            assert!(targets.windows(2).all(|w| w[0] == w[1]));
        }
    }
}

#[test]
fn pipeline_shape_at_default_rates() {
    let cfg = SyntheticConfig {
        n_subjects: 1,
        n_trials_per_subject: 1,
        ..SyntheticConfig::default()
    };
    let rec = generate_subject(&cfg, 0).unwrap();
    let raw = extract_epochs(&rec, WINDOW_MS, 0).unwrap();
    assert_eq!(raw.n_samples(), 200);
    let e = downsample(&raw, 8).unwrap();
    assert_eq!((e.n_channels(), e.n_samples(), e.n_features()), (55, 25, 1375));
    assert_eq!(e.sampling_rate, 25.0);
    assert_eq!(e.len(), 300);
    e.validate().unwrap();
}

#[test]
fn containers_from_generated_data_round_trip() {
    let cfg = small_config(2);
    let rec = generate_subject(&cfg, 1).unwrap();
    let mut e = extract_downsampled(&rec, WINDOW_MS, 0, 8).unwrap();
    e.quantize_f32();
    let mut buf = Vec::new();
    write_epochs(&mut buf, &e).unwrap();
    assert_eq!(read_epochs(&mut buf.as_slice()).unwrap(), e);
    assert_eq!(e.subject_ids[0], 1);
}

fn recording(seed: u64) -> RawRecording {
    let cfg = SyntheticConfig {
        n_subjects: 1,
        n_channels: 3,
        n_chars: 4,
        n_trials_per_subject: 2,
        n_repetitions: 2,
        p300: P300Config {
            channels: vec![1],
            ..P300Config::default()
        },
        seed,
        ..SyntheticConfig::default()
    };
    generate_subject(&cfg, 0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn downsampling_composes(seed in 0u64..1000, a in prop::sample::select(vec![1usize, 2, 4, 5]), b in prop::sample::select(vec![1usize, 2, 4, 5])) {
        prop_assume!(200 % (a * b) == 0);
        let e = extract_epochs(&recording(seed), WINDOW_MS, 0).unwrap();
        let two = downsample(&downsample(&e, a).unwrap(), b).unwrap();
        let one = downsample(&e, a * b).unwrap();
        prop_assert_eq!(two.n_samples(), one.n_samples());
        for (x, y) in two.data.iter().zip(one.data.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn jitter_shifts_the_window(seed in 0u64..1000, k in -24i64..=24) {
        let rec = recording(seed);
        let ms = k * 5;
        let base = extract_epochs(&rec, WINDOW_MS, 0).unwrap();
        prop_assert_eq!(&extract_epochs(&rec, WINDOW_MS, 0).unwrap(), &base);
        let shifted = extract_epochs(&rec, WINDOW_MS, ms).unwrap();
        prop_assert_eq!(&shifted.labels, &base.labels);
        prop_assert_eq!(&shifted.onsets, &base.onsets);
        let lead = 40i64;
        for (i, ev) in rec.events.iter().enumerate() {
            let start = ev.onset_sample as i64 - lead + k;
            for c in 0..3 {
                prop_assert_eq!(shifted.data[[i, c, 0]], rec.signal[[c, start as usize]]);
                prop_assert_eq!(shifted.data[[i, c, 199]], rec.signal[[c, start as usize + 199]]);
            }
        }
    }

    #[test]
    fn fused_path_equals_two_steps(seed in 0u64..1000, k in -3i64..=3) {
        let rec = recording(seed);
        let two = downsample(&extract_epochs(&rec, WINDOW_MS, 40 * k).unwrap(), 8).unwrap();
        prop_assert_eq!(extract_downsampled(&rec, WINDOW_MS, 40 * k, 8).unwrap(), two);
    }

    #[test]
    fn folds_are_deterministic_partitions(seed in any::<u64>(), k in 2usize..=4) {
        let e = extract_downsampled(&recording(3), WINDOW_MS, 0, 8).unwrap();
        let a = split_folds(&e, k, 1, seed).unwrap();
        let b = split_folds(&e, k, 1, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let mut seen = vec![0usize; e.len()];
        for f in 0..k {
            let (train, test) = a.split(&e, f);
            prop_assert_eq!(train.len() + test.len(), e.len());
            for &i in &test {
                seen[i] += 1;
            }
            // whole trials stay together
            let test_keys: std::collections::BTreeSet<_> = test.iter().map(|&i| TrialKey::of(&e, i, 1)).collect();
            prop_assert!(train.iter().all(|&i| !test_keys.contains(&TrialKey::of(&e, i, 1))));
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
    }
}
