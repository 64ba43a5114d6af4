#![no_std]
// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod allocator;
pub mod channel;
pub mod comp;
pub mod oracle;
pub mod qos;
pub mod scenario;
