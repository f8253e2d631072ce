//! Toolkit for guarded and two-variable fragments of first-order logic.

pub mod syntax;
pub mod fragments;
pub mod transform;
pub mod semantics;
pub mod verify;
pub mod cli;
