pub mod bus;
pub mod clock;
pub mod dialog;
pub mod dispatch;
pub mod embedding;
pub mod extract;
pub mod fixtures;
pub mod home;
pub mod lang;
pub mod registry;
pub mod service;
pub mod sim;
