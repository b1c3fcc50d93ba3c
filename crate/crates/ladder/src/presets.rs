//! Named models usable as `model = "<name>"` in configs.

use ladder_core::increments::DEFAULT_PARETO_TRUNCATION;
use ladder_core::ModelSpec;

pub struct Preset {
    pub name: &'static str,
    pub about: &'static str,
    pub spec: fn() -> ModelSpec,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "lazy-walk",
        about: "steps -1, 0, +1 with probabilities 1/4, 1/2, 1/4",
        spec: || ModelSpec::finite_lattice(&[(-1, 0.25), (0, 0.5), (1, 0.25)]),
    },
    Preset {
        name: "simple-walk",
        about: "steps -1, +1 with probability 1/2 each (period 2)",
        spec: || ModelSpec::finite_lattice(&[(-1, 0.5), (1, 0.5)]),
    },
    Preset {
        name: "pareto-0.5",
        about: "symmetric two-sided Pareto, alpha = 0.5",
        spec: || ModelSpec::two_sided_pareto(0.5, 0.5),
    },
    Preset {
        name: "pareto-1.5",
        about: "symmetric two-sided Pareto, alpha = 1.5, centered",
        spec: || ModelSpec::two_sided_pareto(1.5, 0.5),
    },
    Preset {
        name: "pareto-1.5-right",
        about: "one-sided right Pareto tail (beta = 1), alpha = 1.5, centered",
        spec: || ModelSpec::two_sided_pareto(1.5, 1.0),
    },
    Preset {
        name: "pareto-1.5-left",
        about: "one-sided left Pareto tail (beta = -1), alpha = 1.5, centered",
        spec: || ModelSpec::two_sided_pareto(1.5, 0.0),
    },
    Preset {
        name: "lattice-pareto-0.5",
        about: "symmetric integer Pareto, alpha = 0.5, support cut at 10^6",
        spec: || ModelSpec::lattice_pareto(0.5, 0.5, DEFAULT_PARETO_TRUNCATION),
    },
];

pub fn lookup(name: &str) -> Option<ModelSpec> {
    PRESETS.iter().find(|p| p.name == name).map(|p| (p.spec)())
}
