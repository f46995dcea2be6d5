//! Shared fixtures for the criterion benches.

use bpl_pinn::data::DataSizes;
use bpl_pinn::posterior::{LabelMode, Posterior};
use bpl_pinn::{Architecture, DataBundle, Mlp, ParameterVector, PosteriorSpec, SystemSpec};

/// A full-size posterior with every point active, and Glorot-initialized parameters.
pub fn posterior_fixture(system: SystemSpec) -> (Posterior, ParameterVector) {
    let mlp = Mlp::new(Architecture::default()).expect("default architecture");
    let bundle = DataBundle::build(&system, DataSizes::default(), 1);
    let active = bundle.all_active();
    let params = mlp.init_parameters(2);
    let post = Posterior::new(mlp, PosteriorSpec::default(), system, &bundle, &active, LabelMode::Pl).expect("default spec");
    (post, params)
}
