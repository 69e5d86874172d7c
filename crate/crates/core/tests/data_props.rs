use patchecho::data::{resample, synth_generate, ChannelStats, SignalRecord, SplitSpec};
use patchecho::Tensor;
use proptest::prelude::*;

fn record(channels: usize, len: usize) -> SignalRecord {
    let samples = (0..channels * len).map(|i| i as f32).collect();
    let labels = (0..len).map(|t| (t / 7) % 3).collect();
    SignalRecord::new(Tensor::new(vec![channels, len], samples).unwrap(), labels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn non_overlapping_windows_tile_the_record(len in 1usize..400, width in 1usize..60, channels in 1usize..4) {
        let rec = record(channels, len);
        let windows = rec.windows(width, width).unwrap();
        prop_assert_eq!(windows.len(), len / width);
        let mut used = vec![0u8; len];
        for (w, start) in &windows {
            prop_assert_eq!(w.len(), width);
            // the first channel stores its own sample index
            prop_assert_eq!(w.data.row(0)[0] as usize, *start);
            used[*start..start + width].iter_mut().for_each(|u| *u += 1);
        }
        prop_assert!(used.iter().all(|&u| u <= 1));
    }

    #[test]
    fn time_split_never_shares_samples(
        len in 50usize..600,
        width in 5usize..40,
        stride_frac in 0.2f64..1.5,
        train in 0.3f64..0.7,
        val in 0.05f64..0.25,
    ) {
        let stride = ((width as f64 * stride_frac) as usize).max(1);
        let rec = record(1, len);
        let (_, starts): (Vec<_>, Vec<usize>) = rec.windows(width, stride).unwrap().into_iter().unzip();
        let split = SplitSpec::by_time(&starts, width, len, train, val).unwrap();
        let span = |r: &std::ops::Range<usize>| -> Vec<usize> {
            starts[r.clone()].iter().flat_map(|&s| s..s + width).collect()
        };
        let (tr, va, te) = (span(&split.train), span(&split.val), span(&split.test));
        for t in &tr {
            prop_assert!(!te.contains(t) && !va.contains(t));
        }
        for t in &va {
            prop_assert!(!te.contains(t));
        }
    }

    #[test]
    fn resample_keeps_endpoints(v in prop::collection::vec(-5.0f32..5.0, 2..80), target in 2usize..120) {
        let n = v.len();
        let x = Tensor::new(vec![1, n], v.clone()).unwrap();
        let y = resample(&x, target).unwrap();
        prop_assert_eq!(y.shape(), &[1, target]);
        prop_assert_eq!(y.data()[0], v[0]);
        prop_assert_eq!(y.data()[target - 1], v[n - 1]);
    }
}

#[test]
fn train_statistics_standardize_the_training_split() {
    let train = synth_generate(3, 20, 2, 64, 4).unwrap();
    let stats = ChannelStats::fit(&train);
    let normed = stats.apply_all(&train);
    for ch in 0..2 {
        let values: Vec<f64> = normed.iter().flat_map(|w| w.data.row(ch).iter().map(|&v| f64::from(v))).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        assert!(mean.abs() < 1e-4 && (var.sqrt() - 1.0).abs() < 1e-3, "channel {ch}: {mean} {var}");
    }
}

#[test]
fn synthetic_data_is_seed_stable() {
    let a = synth_generate(4, 5, 3, 32, 9).unwrap();
    let b = synth_generate(4, 5, 3, 32, 9).unwrap();
    let c = synth_generate(4, 5, 3, 32, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
