//! Shared fixtures for the criterion benchmarks.

use clt_spectra::dens::build_density;
use clt_spectra::{DistributionSpec, GridConfig, GridDensity};

/// Density for `spec` on a grid of `nodes` nodes.
pub fn fixture(spec: &str, nodes: usize) -> (GridDensity, GridConfig) {
    let cfg = GridConfig::default().with_nodes(nodes);
    let spec: DistributionSpec = spec.parse().expect("fixture spec");
    let d = build_density(&spec, &cfg, 1).expect("fixture density");
    (d, cfg)
}
