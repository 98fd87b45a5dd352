//! Statistical comparison of model results: one-way ANOVA over per-fold
//! metric vectors, and Tukey's HSD post-hoc test built on a numerically
//! integrated studentized range distribution.

pub mod anova;
pub mod special;
pub mod tukey;

pub use anova::{f_cdf, f_sf, one_way_anova, AnovaResult};
pub use tukey::{ptukey, qtukey, tukey_from_summary, tukey_hsd, TukeyPair, TukeyReport};
