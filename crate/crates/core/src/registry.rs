//! Name-keyed registry of the interchangeable strategies: bias-correction
//! variants, stage cuts, and MAP solver backends. The command line selects
//! each by name at runtime.

use crate::error::{Error, Result};
use crate::hlmrf::{ConsensusAdmm, MapSolver, ProjectedSubgradient};
use crate::pipeline::{AllCut, BiasCorrection, Bur, Gur, RrCut, StageCut, Ur, VbCut};

pub struct Registry {
    bias: Vec<Box<dyn BiasCorrection>>,
    stages: Vec<Box<dyn StageCut>>,
    solvers: Vec<Box<dyn MapSolver>>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl Registry {
    pub fn with_builtins() -> Self {
        Registry {
            bias: vec![Box::new(Ur), Box::new(Gur), Box::new(Bur)],
            stages: vec![Box::new(VbCut), Box::new(RrCut), Box::new(AllCut)],
            solvers: vec![
                Box::new(ProjectedSubgradient::default()),
                Box::new(ConsensusAdmm::default()),
            ],
        }
    }

    pub fn bias(&self, name: &str) -> Result<&dyn BiasCorrection> {
        let wanted = name.to_lowercase();
        self.bias
            .iter()
            .find(|b| b.name() == wanted)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "bias-correction variant",
                name: name.to_string(),
                known: self.bias.iter().map(|b| b.name()).collect::<Vec<_>>().join(", "),
            })
    }

    pub fn stage_cut(&self, name: &str) -> Result<&dyn StageCut> {
        let wanted = name.to_lowercase();
        self.stages
            .iter()
            .find(|s| s.name() == wanted)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "stage cut",
                name: name.to_string(),
                known: self.stages.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "),
            })
    }

    pub fn solver(&self, name: &str) -> Result<&dyn MapSolver> {
        let wanted = name.to_lowercase();
        self.solvers
            .iter()
            .find(|s| s.name() == wanted)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "solver backend",
                name: name.to_string(),
                known: self
                    .solvers
                    .iter()
                    .map(|s| s.name())
                    .collect::<Vec<_>>()
                    .join(", "),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve_by_name_case_insensitively() {
        let registry = Registry::with_builtins();
        for name in ["ur", "gur", "bur", "GUR"] {
            assert!(registry.bias(name).is_ok(), "{name}");
        }
        for name in ["vb", "rr", "all", "All"] {
            assert!(registry.stage_cut(name).is_ok(), "{name}");
        }
        for name in ["pgd", "admm", "ADMM"] {
            assert!(registry.solver(name).is_ok(), "{name}");
        }
    }

    #[test]
    fn unknown_names_list_the_known_set() {
        let registry = Registry::with_builtins();
        match registry.bias("zur") {
            Err(Error::UnknownStrategy { known, .. }) => {
                assert_eq!(known, "ur, gur, bur");
            }
            other => panic!("expected UnknownStrategy, got {other:?}"),
        }
        assert!(registry.stage_cut("half").is_err());
        assert!(registry.solver("newton").is_err());
    }
}
