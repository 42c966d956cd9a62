pub mod controls;
pub mod covariance;
pub mod engine;
pub mod linalg;
pub mod masknet;
pub mod metrics;
pub mod npw1;
pub mod pmwf;
pub mod report;
pub mod scene;
pub mod stft;
pub mod wav;
