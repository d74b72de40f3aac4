use chaosmask::config::{config_to_string, load_config, parse_config, save_config};
use chaosmask::csv_io::{read_waveform_csv, write_waveform_csv};
use chaosmask::waveform::Waveform;
use chaosmask::Error;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[test]
fn hundred_thousand_random_doubles_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut values = Vec::with_capacity(100_000);
    while values.len() < 100_000 {
        let v = f64::from_bits(rng.next_u64());
        if v.is_finite() {
            values.push(v);
        }
    }
    let wf = Waveform::new(0.0, 1e-5, values).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wf.csv");
    write_waveform_csv(&wf, &path).unwrap();
    let back = read_waveform_csv(&path).unwrap();
    assert_eq!(back.step.to_bits(), wf.step.to_bits());
    assert!(back.samples.iter().zip(&wf.samples).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn single_sample_file_body() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    write_waveform_csv(&Waveform::new(0.0, 1e-4, vec![5.5]).unwrap(), &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "t,value\n0.00000000000000000,5.5000000000000000\n"
    );
}

#[test]
fn malformed_rows_report_row_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "t,value\n0,1\n0.1,2\nzzz,3\n").unwrap();
    assert!(matches!(read_waveform_csv(&path), Err(Error::Csv { row: 4, .. })));
    std::fs::write(&path, "0,1\n0.1,2\n").unwrap();
    assert!(matches!(read_waveform_csv(&path), Err(Error::Csv { row: 1, .. })));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("in.cfg");
    std::fs::write(
        &src,
        "# sample\nbuck.v_in = 24.0\nboost.i_ref = 2.5\nramp.frequency = 2500\ngains.g2 = 1.0\n\
         channel.sigma = 0.0\nchannel.seed = 42\nmessage.kind = sine\nmessage.amplitude = 0.5\nmessage.frequency = 50\n",
    )
    .unwrap();
    let cfg = load_config(&src, &[]).unwrap();
    assert_eq!(cfg.link.buck.v_in, 24.0);
    let out = dir.path().join("out.cfg");
    save_config(&cfg, &out).unwrap();
    let again = load_config(&out, &[]).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(config_to_string(&again), std::fs::read_to_string(&out).unwrap());
}

#[test]
fn empty_config_is_the_default_and_unknown_keys_fail() {
    assert_eq!(parse_config("", &[]).unwrap().link, chaosmask::link::LinkConfig::default());
    assert!(matches!(parse_config("buck.vin = 3\n", &[]), Err(Error::ConfigParse { line: 1, .. })));
}
