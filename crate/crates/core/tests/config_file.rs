//! The shipped example configuration.

use reachplan::config::load_config;
use reachplan::ExperimentConfig;

#[test]
fn example_file_spells_out_the_defaults() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/example.toml");
    assert_eq!(load_config(path).unwrap(), ExperimentConfig::default());
}

#[test]
fn empty_file_gives_the_defaults() {
    assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
}
