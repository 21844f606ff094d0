//! Command-line front end for `trapgen-core`: spectra, protocol traces,
//! trajectory ensembles, the verification suite and figure output.

pub mod chart;
pub mod cli;
pub mod figure2;
pub mod table;
pub mod theta;
pub mod verify;

pub use chart::{render_chart, render_panels, write_chart, Panel, Series};
pub use cli::{run, Cli};
pub use figure2::{figure2, Figure2};
pub use table::{write_table, Format, Table};
pub use theta::parse_theta;
pub use verify::{run_suite, Check};
