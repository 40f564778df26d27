pub mod oracle;
pub mod reduction;
pub mod gcheck;
