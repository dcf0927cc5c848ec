//! Exact-arithmetic engine for universality criterion sets of totally
//! positive definite quadratic forms over Q and real quadratic fields:
//! square-class enumeration, representation testing by bounded exact
//! enumeration, truant and critical-element certification, and
//! escalation trees over Z.
//!
//! All certificates are bounded: a witness is always reported together with
//! the norm bound up to which it was verified, never as an unconditional
//! statement.

pub mod criterion;
pub mod elements;
pub mod error;
pub mod forms;
pub mod ring;
pub mod sspec;
pub mod wire;
pub mod ztree;

pub use criterion::XClass;
pub use elements::SquareClass;
pub use error::{Error, Result};
pub use forms::QForm;
pub use ring::{AlgInt, Embedding, FieldCtx, FieldDescriptor, OmegaMode};
pub use sspec::SSpec;
