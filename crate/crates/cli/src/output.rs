//! CSV and JSON writers with a self-describing header.

use std::io::Write;

use ambiport_core::Config;
use serde::Serialize;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Provenance written ahead of every table.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Config,
}

impl Header {
    pub fn new(command: impl Into<String>, config: Config) -> Self {
        Self {
            tool: "ambiport",
            version: VERSION,
            command: command.into(),
            config,
        }
    }
}

/// A result that can be flattened into a CSV table.
pub trait Rows: Serialize {
    fn columns(&self) -> Vec<&'static str>;
    fn records(&self) -> Vec<Vec<String>>;
}

/// Formats a number with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..15).contains(&e) {
        trim(format!("{:.*}", (11 - e).max(0) as usize, x))
    } else {
        let s = format!("{x:.11e}");
        let (m, exp) = s.split_once('e').expect("exponent");
        format!("{}e{exp}", trim(m.to_string()))
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write<W: Write, T: Rows>(mut out: W, format: Format, header: &Header, body: &T) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            writeln!(out, "# {} {}", header.tool, header.version)?;
            writeln!(out, "# command: {}", header.command)?;
            writeln!(out, "# config:")?;
            for line in header.config.to_toml_string().lines() {
                if line.is_empty() {
                    writeln!(out, "#")?;
                } else {
                    writeln!(out, "#   {line}")?;
                }
            }
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(body.columns())?;
            for r in body.records() {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a, T> {
                #[serde(flatten)]
                header: &'a Header,
                result: &'a T,
            }
            serde_json::to_writer_pretty(&mut out, &Doc { header, result: body })?;
            writeln!(out)?;
        }
    }
    Ok(())
}
