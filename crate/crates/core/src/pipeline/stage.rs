//! Stage cuts: how far along the pipeline an answer is taken from.
//!
//! All three run on an already bias-corrected riddle. `vb` answers from the
//! seed centroids alone, `rr` from the retrieval stage's candidates, `all`
//! from the full two-stage inference.

use crate::error::Result;
use crate::eval::{baseline_rr, baseline_vb};
use crate::hlmrf::MapSolver;
use crate::kgraph::KnowledgeStore;
use crate::rules::ThetaConfig;

use super::{solve_prepared, AnswerList, Riddle};

pub trait StageCut: Send + Sync {
    fn name(&self) -> &'static str;

    fn answer(
        &self,
        riddle: &Riddle,
        store: &KnowledgeStore,
        theta: &ThetaConfig,
        solver: &dyn MapSolver,
    ) -> Result<AnswerList>;
}

/// Seed-centroid baseline.
pub struct VbCut;

impl StageCut for VbCut {
    fn name(&self) -> &'static str {
        "vb"
    }

    fn answer(
        &self,
        riddle: &Riddle,
        store: &KnowledgeStore,
        _theta: &ThetaConfig,
        _solver: &dyn MapSolver,
    ) -> Result<AnswerList> {
        baseline_vb(riddle, store)
    }
}

/// Retrieval-stage baseline.
pub struct RrCut;

impl StageCut for RrCut {
    fn name(&self) -> &'static str {
        "rr"
    }

    fn answer(
        &self,
        riddle: &Riddle,
        store: &KnowledgeStore,
        theta: &ThetaConfig,
        _solver: &dyn MapSolver,
    ) -> Result<AnswerList> {
        baseline_rr(riddle, store, theta)
    }
}

/// The full two-stage inference.
pub struct AllCut;

impl StageCut for AllCut {
    fn name(&self) -> &'static str {
        "all"
    }

    fn answer(
        &self,
        riddle: &Riddle,
        store: &KnowledgeStore,
        theta: &ThetaConfig,
        solver: &dyn MapSolver,
    ) -> Result<AnswerList> {
        let tag = riddle
            .images
            .first()
            .map(|s| s.classifier_tag.clone())
            .unwrap_or_default();
        solve_prepared(riddle, store, theta, solver, &tag).map(|solution| solution.answers)
    }
}
