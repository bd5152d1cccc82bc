mod common;

use common::*;
use mapes_core::linalg::CMatrix;
use mapes_core::pattern::{parse_pattern_batch, ParseOptions, PixelPattern};
use mapes_core::prior::touchstone::{ParamKind, Touchstone};
use mapes_core::prior::{load_prior, RECIPROCITY_TOL};
use mapes_core::solver::{evaluate, NetworkResponse};
use mapes_core::synth::SynthParams;
use mapes_core::topology::{enumerate_ports, DesignSpace, FrequencyGrid};
use mapes_core::{c64, Error, PriorData};

const FOUR_PORT_Z: &str = "\
! four port impedance file
# GHZ Z RI R 50
1.0  1.0 0.1  0.2 0.0  0.3 0.0  0.4 0.0
     0.2 0.0  2.0 0.2  0.5 0.0  0.6 0.0
     0.3 0.0  0.5 0.0  3.0 0.3  0.7 0.0
     0.4 0.0  0.6 0.0  0.7 0.0  4.0 0.4
2.0  1.1 0.1  0.2 0.0  0.3 0.0  0.4 0.0
     0.2 0.0  2.1 0.2  0.5 0.0  0.6 0.0
     0.3 0.0  0.5 0.0  3.1 0.3  0.7 0.0
     0.4 0.0  0.6 0.0  0.7 0.0  4.1 0.4
3.0  1.2 0.1  0.2 0.0  0.3 0.0  0.4 0.0
     0.2 0.0  2.2 0.2  0.5 0.0  0.6 0.0
     0.3 0.0  0.5 0.0  3.2 0.3  0.7 0.0
     0.4 0.0  0.6 0.0  0.7 0.0  4.2 0.4
";

fn single_pixel() -> DesignSpace {
    DesignSpace::single_layer(1, 1)
}

#[test]
fn four_port_impedance_file_loads_onto_a_single_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pixel.z4p");
    std::fs::write(&path, FOUR_PORT_Z).unwrap();
    let topo = enumerate_ports(&single_pixel());
    assert_eq!(topo.len(), 4);
    let prior = load_prior(&path, &topo).unwrap();
    assert_eq!(prior.freqs().as_slice(), &[1e9, 2e9, 3e9]);
    // normalized values are scaled by the reference
    assert_eq!(prior.matrix(1)[(2, 2)], c64::new(155.0, 15.0));
    assert_eq!(prior.matrix(0)[(0, 3)], c64::new(20.0, 0.0));
    prior.validate_reciprocity(RECIPROCITY_TOL).unwrap();
}

#[test]
fn five_port_file_is_rejected_for_a_four_port_topology() {
    let mut text = String::from("# HZ Z RI R 1\n");
    for f in 1..=2 {
        text.push_str(&format!("{f}e9"));
        for i in 0..5 {
            for j in 0..5 {
                let v = if i == j { 10.0 } else { 1.0 };
                text.push_str(&format!(" {v} 0"));
                if j % 4 == 3 {
                    text.push('\n');
                }
            }
            text.push('\n');
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("five.z5p");
    std::fs::write(&path, &text).unwrap();
    let topo = enumerate_ports(&single_pixel());
    match load_prior(&path, &topo) {
        Err(Error::PortCountMismatch { expected: 4, found: 5 }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn extension_must_agree_with_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pixel.s3p");
    std::fs::write(&path, FOUR_PORT_Z).unwrap();
    assert!(matches!(Touchstone::read(&path), Err(Error::PortCountMismatch { .. })));
}

#[test]
fn magnitude_angle_and_decibel_forms() {
    let ma = Touchstone::parse("# MHZ S MA R 50\n100 0.5 90\n").unwrap();
    let v = ma.data[0][(0, 0)];
    assert!((v - c64::new(0.0, 0.5)).norm() <= 1e-15);
    assert_eq!(ma.freqs, vec![100e6]);

    let db = Touchstone::parse("# KHZ S DB R 75\n1 -20 180\n").unwrap();
    let v = db.data[0][(0, 0)];
    assert!((v - c64::new(-0.1, 0.0)).norm() <= 1e-15);
    assert_eq!(db.ref_ohms, 75.0);

    // two-port data is listed column-major
    let two = Touchstone::parse("# HZ S RI\n5 0.11 0 0.21 0 0.12 0 0.22 0\n").unwrap();
    assert_eq!(two.data[0][(1, 0)], c64::new(0.21, 0.0));
    assert_eq!(two.data[0][(0, 1)], c64::new(0.12, 0.0));
}

#[test]
fn unsupported_parameters_are_refused() {
    assert!(matches!(Touchstone::parse("# GHZ Y RI R 50\n1 1 0\n"), Err(Error::UnsupportedFormat(_))));
    assert!(matches!(Touchstone::parse("[Version] 2.0\n# GHZ S RI R 50\n1 1 0\n"), Err(Error::UnsupportedFormat(_))));
}

#[test]
fn decreasing_frequencies_are_refused() {
    let err = Touchstone::parse("# GHZ S RI R 50\n2 0.1 0\n1 0.1 0\n").and_then(|ts| {
        let topo = enumerate_ports(&DesignSpace::single_layer(1, 1));
        PriorData::from_touchstone(ts, &topo).map(|_| ())
    });
    assert!(matches!(err, Err(Error::NonIncreasingFrequencies { .. }) | Err(Error::PortCountMismatch { .. })));
    assert!(matches!(FrequencyGrid::new(vec![2.0, 1.0]), Err(Error::NonIncreasingFrequencies { index: 1, .. })));
}

#[test]
fn cache_and_touchstone_describe_the_same_prior() {
    let b = bench(DesignSpace::single_layer(2, 2), 5, FrequencyGrid::linspace(1e9, 9e9, 4).unwrap(), &SynthParams::default());
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("prior.bin");
    let ts_z = dir.path().join(format!("prior.z{}p", b.topo.len()));
    let ts_s = dir.path().join(format!("prior.s{}p", b.topo.len()));
    b.prior.write_cache(&cache).unwrap();
    b.prior.write_touchstone(&ts_z, ParamKind::Z, 50.0).unwrap();
    b.prior.write_touchstone(&ts_s, ParamKind::S, 50.0).unwrap();
    let from_cache = load_prior(&cache, &b.topo).unwrap();
    let from_z = load_prior(&ts_z, &b.topo).unwrap();
    let from_s = load_prior(&ts_s, &b.topo).unwrap();
    assert_eq!(from_cache.matrices(), b.prior.matrices());
    for f in 0..b.freqs.len() {
        assert!(rel(from_z.matrix(f), b.prior.matrix(f)) <= 1e-14);
        assert!(rel(from_s.matrix(f), b.prior.matrix(f)) <= 1e-10);
    }
    let p = PixelPattern::all_present(&b.space);
    let io = mapes_core::pattern::IoSelection::new(ground_ports(&b.topo)[..2].to_vec(), &b.topo, false).unwrap();
    let a = evaluate(&from_cache, &p, &io, czero()).unwrap();
    let c = evaluate(&from_z, &p, &io, czero()).unwrap();
    for (x, y) in a.data.iter().zip(&c.data) {
        assert!(rel(x, y) <= 1e-12);
    }
}

#[test]
fn two_port_response_writes_an_s2p() {
    let b = bench(DesignSpace::single_layer(2, 2), 6, FrequencyGrid::linspace(1e9, 5e9, 3).unwrap(), &SynthParams::default());
    let io = mapes_core::pattern::IoSelection::new(ground_ports(&b.topo)[..2].to_vec(), &b.topo, false).unwrap();
    let resp = evaluate(&b.prior, &PixelPattern::all_present(&b.space), &io, czero()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.s2p");
    let s = resp.to_s(50.0).unwrap();
    s.write_touchstone(&path, 50.0).unwrap();
    let back = Touchstone::read(&path).unwrap();
    assert_eq!(back.kind, ParamKind::S);
    assert_eq!(back.ports(), 2);
    for (x, y) in s.data.iter().zip(&back.data) {
        assert!(rel(x, y) <= 1e-14);
    }
    let json = resp.to_json_value(None);
    assert_eq!(NetworkResponse::from_json_value(&json).unwrap(), resp);
}

#[test]
fn non_reciprocal_prior_is_reported_with_its_worst_pair() {
    let topo = enumerate_ports(&single_pixel());
    let mut z = CMatrix::from_fn(4, 4, |i, j| c64::new(if i == j { 10.0 } else { 1.0 }, 0.0));
    z[(1, 3)] = c64::new(1.5, 0.0);
    let prior = PriorData::new(topo, FrequencyGrid::new(vec![1e9, 2e9]).unwrap(), vec![CMatrix::from_fn(4, 4, |i, j| c64::new(if i == j { 10.0 } else { 1.0 }, 0.0)), z]).unwrap();
    let v = prior.reciprocity_violations(RECIPROCITY_TOL);
    assert_eq!(v.len(), 1);
    assert_eq!((v[0].freq_index, v[0].p, v[0].q), (1, 1, 3));
    assert!(matches!(prior.validate_reciprocity(RECIPROCITY_TOL), Err(Error::NonReciprocal { .. })));
}

#[test]
fn batch_parsing_can_coerce_vias() {
    let space = DesignSpace::new(2, 2, 2, true).unwrap();
    let text = r#"
{"id": "a", "rows": 2, "cols": 2, "layers": 2, "pixels": [[[1,1],[1,1]], [[1,0],[1,1]]], "vias": [[[1,1],[0,0]]]}
{"id": "b", "rows": 2, "cols": 2, "layers": 2, "pixels": [[1,1,1,1], [1,1,1,1]], "vias": [[0,0,0,1]]}
"#;
    let strict = ParseOptions { space: Some(space.clone()), coerce_vias: false };
    match parse_pattern_batch(text, &strict) {
        Err(Error::ViaConstraintViolation { sites }) => assert_eq!(sites, vec![(1, 2, 3)]),
        other => panic!("unexpected {other:?}"),
    }
    let lenient = ParseOptions { space: Some(space), coerce_vias: true };
    let parsed = parse_pattern_batch(text, &lenient).unwrap();
    assert_eq!(parsed.len(), 2);
    assert_eq!(parsed[0].id, Some(serde_json::json!("a")));
    assert_eq!(parsed[0].warnings.len(), 1);
    assert!(!parsed[0].pattern.via(0, 0, 1));
    assert!(parsed[0].pattern.via(0, 0, 0));
    assert!(parsed[1].warnings.is_empty());
    assert!(parsed[1].pattern.via(0, 1, 1));
}

#[test]
fn pattern_with_wrong_dimensions_is_refused() {
    let opts = ParseOptions { space: Some(DesignSpace::single_layer(3, 3)), coerce_vias: false };
    let text = r#"{"rows": 2, "cols": 2, "pixels": [[1,0],[0,1]]}"#;
    assert!(parse_pattern_batch(text, &opts).is_err());
}
