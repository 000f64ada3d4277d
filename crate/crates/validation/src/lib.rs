//! Holds the acceptance suite (`tests/acceptance.rs`); nothing is exported.
