//! Generation of document-grounded question-answer nugget banks and scoring
//! of report-generation systems against them.
//!
//! The pipeline runs in three stages per topic — QA generation from ranked
//! documents, paraphrase clustering with answer merging, and quality-based
//! subselection — and the evaluation side judges reports against the
//! resulting banks, builds leaderboards, and compares leaderboards with rank
//! statistics.

pub mod alignment;
pub mod clusterstage;
pub mod error;
pub mod evalharness;
pub mod formats;
pub mod genstage;
pub mod model;
pub mod providers;
pub mod rankstats;
pub mod refinestage;
pub mod selectstage;
pub mod util;

pub use error::{Error, Result};
