//! Shared inputs for the criterion benches.

use scengen_core::bnet::{fit_regression, learn_structure};
use scengen_core::config::{ModelOptions, Paths, RunConfig, SimulationOptions, ValidationOptions};
use scengen_core::fixture::{generate, Fixture, FixtureOptions};
use scengen_core::marginal::{fit_kde, Support};
use scengen_core::pipeline::{fit_model, Inputs};
use scengen_core::{forward, BayesNet, Marginals, ModelArchive, NormalPanel, Units};

pub fn fixture(n_stations: usize, years: usize, hourly: bool) -> Fixture {
    generate(&FixtureOptions {
        n_stations,
        years,
        hourly,
        ..FixtureOptions::default()
    })
    .expect("fixture")
}

pub fn marginals(fx: &Fixture) -> Marginals {
    fx.monthly
        .stations()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let support = match s.units() {
                Units::CapacityFactor => Support::interval(0.0, 1.0),
                Units::Volume => Support::lower(0.0),
            };
            (s.id.clone(), fit_kde(&fx.monthly.observed(j), support).expect("kde"))
        })
        .collect()
}

pub fn scores(fx: &Fixture) -> NormalPanel {
    forward(&fx.monthly, &marginals(fx)).expect("forward")
}

pub fn network(fx: &Fixture, max_parents: usize) -> BayesNet {
    let z = scores(fx);
    let dag = learn_structure(&z, max_parents, 5, 42).expect("structure");
    fit_regression(&dag, &z).expect("regression").with_marginals(marginals(fx))
}

pub fn config() -> RunConfig {
    RunConfig {
        paths: Paths {
            data: "unused".into(),
            metadata: "unused".into(),
            inflow_data: None,
            output_dir: "unused".into(),
        },
        model: ModelOptions::default(),
        simulation: SimulationOptions::default(),
        validation: ValidationOptions::default(),
    }
}

pub fn archive(fx: &Fixture) -> ModelArchive {
    let inputs = Inputs {
        stations: fx.stations.clone(),
        monthly: fx.monthly.clone(),
        hourly: fx.hourly.clone(),
    };
    fit_model(&inputs, &config()).expect("fit")
}
