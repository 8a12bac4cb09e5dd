pub mod aml;
pub mod concretize;
pub mod labels;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod sketch;
pub mod toy;
