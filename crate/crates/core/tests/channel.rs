use chaosmask::channel::{channel_apply, standard_normal, ChannelModel};
use chaosmask::defaults;
use chaosmask::link::{run_link, LinkConfig};

#[test]
fn awgn_stream_statistics() {
    let ch = ChannelModel::Awgn { sigma: 0.1, seed: 42 };
    let n = 1_000_000u64;
    let (mut sum, mut sq) = (0.0, 0.0);
    for k in 0..n {
        let v = channel_apply(&ch, 0.0, k);
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    let std = (sq / n as f64 - mean * mean).sqrt();
    assert!(mean.abs() <= 4.0 * 0.1 / 1000.0, "mean {mean}");
    assert!((std - 0.1).abs() <= 0.001, "std {std}");
}

#[test]
fn draw_depends_only_on_seed_and_index() {
    let ch = ChannelModel::Awgn { sigma: 0.25, seed: 7 };
    for k in [0u64, 1, 999, 1 << 33] {
        assert_eq!(ch.apply(1.5, k), 1.5 + 0.25 * standard_normal(7, k));
    }
    assert_eq!(channel_apply(&ChannelModel::Ideal, 5.5, 3), 5.5);
    assert_eq!(channel_apply(&ChannelModel::Awgn { sigma: 0.0, seed: 1 }, 5.5, 3), 5.5);
}

#[test]
fn zero_sigma_link_equals_ideal_link() {
    let cfg = LinkConfig { duration: 0.01, transient_cut: 0.0, ..LinkConfig::default() };
    let src = defaults::message();
    let ideal = run_link(&cfg, &src, &ChannelModel::Ideal, None).unwrap();
    let quiet = run_link(&cfg, &src, &ChannelModel::Awgn { sigma: 0.0, seed: 5 }, None).unwrap();
    assert_eq!(ideal, quiet);
}
