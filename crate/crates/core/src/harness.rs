//! Experiment pipeline (under construction).
