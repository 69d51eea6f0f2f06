use std::path::PathBuf;

use privroute::tntp::{read_net, read_trips, TntpUnits};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn network_shape() {
    let net = read_net(&data("SiouxFalls_net.tntp"), TntpUnits::default()).unwrap();
    assert_eq!(net.node_count(), 24);
    assert_eq!(net.edge_count(), 76);
    let first = net.edge(0);
    assert_eq!((first.tail, first.head), (1, 2));
    assert_eq!(first.delay.t0, 360.0);
}

#[test]
fn demand_shape() {
    let net = read_net(&data("SiouxFalls_net.tntp"), TntpUnits::default()).unwrap();
    let od = read_trips(&data("SiouxFalls_trips.tntp")).unwrap();
    assert_eq!(od.nonzero_pairs(), 528);
    assert_eq!(od.total(), 360_600.0);
    assert!((od.scaled(1.0 / 6.0).total() - 60_100.0).abs() < 1e-6);
    od.validate_against(&net).unwrap();
}

#[test]
fn missing_file_names_the_path() {
    let err = read_net(&data("nope.tntp"), TntpUnits::default()).unwrap_err();
    assert!(err.to_string().contains("nope.tntp"));
}
