//! Mini-batch training and hyperparameter grid search.

mod grid;
mod train;

pub use grid::{grid_search, model_size, GridCell, GridResult, GridSpec};
pub use train::{train, TrainReport};
