//! Shipped reference models.
//!
//! All use `μ = 1`, `σ = 0`, `λ = 10`; apply [`LevyModel::with_sigma`] for the
//! Gaussian variants. The two fits are hyperexponential approximations of the
//! Weibull(0.6, 0.665) and Pareto(1.2, 5) claim laws, which ship as
//! simulation-only fixtures alongside them.

use crate::error::{Error, Result};
use crate::model::LevyModel;

struct Fixture {
    name: &'static str,
    source: &'static str,
    /// The law a fitted fixture approximates.
    target: &'static str,
}

const FIXTURES: &[Fixture] = &[
    Fixture {
        name: "exp1",
        source: include_str!("../fixtures/exp1.json"),
        target: "exp1",
    },
    Fixture {
        name: "weibull-fit-m6",
        source: include_str!("../fixtures/weibull_fit_m6.json"),
        target: "weibull",
    },
    Fixture {
        name: "pareto-fit-m14",
        source: include_str!("../fixtures/pareto_fit_m14.json"),
        target: "pareto",
    },
    Fixture {
        name: "weibull",
        source: include_str!("../fixtures/weibull.json"),
        target: "weibull",
    },
    Fixture {
        name: "pareto",
        source: include_str!("../fixtures/pareto.json"),
        target: "pareto",
    },
];

/// The closed-form fixtures, in display order.
pub const ANALYTIC: [&str; 3] = ["exp1", "weibull-fit-m6", "pareto-fit-m14"];

pub fn names() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|f| f.name)
}

fn find(name: &str) -> Result<&'static Fixture> {
    FIXTURES
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::UnknownFixture(name.to_string()))
}

/// Raw JSON text of a fixture.
pub fn source(name: &str) -> Result<&'static str> {
    find(name).map(|f| f.source)
}

pub fn load(name: &str) -> Result<LevyModel> {
    LevyModel::from_json(source(name)?)
}

/// Name of the fixture holding the claim law that `name` approximates;
/// exact fixtures map to themselves.
pub fn simulation_target(name: &str) -> Result<&'static str> {
    find(name).map(|f| f.target)
}
