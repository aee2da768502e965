//! Differentially private release of videos by random projection.
//!
//! [`mechanism::run_video_dprp`] is the entry point for a single video and
//! [`batch::run_dataset`] for a directory of them. [`audit`] holds the
//! empirical checks. The guide under `book/` walks through each part with
//! runnable examples, which also run as doc-tests of this crate.

pub mod audit;
pub mod batch;
pub mod calibration;
pub mod error;
pub mod formats;
pub mod linalg;
pub mod mechanism;
pub mod projection;
pub mod rng;
pub mod video;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/video-model.md")]
    mod video_model {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/mechanism.md")]
    mod mechanism {}
    #[doc = include_str!("../../../book/src/reconstruction-order.md")]
    mod reconstruction_order {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/audit.md")]
    mod audit {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
