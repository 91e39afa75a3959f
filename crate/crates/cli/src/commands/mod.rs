pub mod bounds;
pub mod compare;
pub mod enumerate;
pub mod mayer;
pub mod oracle;
pub mod verify;
