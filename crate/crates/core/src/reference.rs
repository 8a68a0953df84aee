//! Published channel and interference reference values, and CSV tables that
//! set them beside the values this crate computes.

use crate::error::Result;
use crate::mai::interference_table;
use crate::ooc::OocParams;
use crate::turbulence::{fading_from_scintillation, scintillation_index, TurbulenceParams};

/// One published channel row at 532 nm in clear ocean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRow {
    pub range: f64,
    pub divergence_deg: f64,
    pub loss: f64,
    pub scintillation_index: f64,
    pub sigma2_x: f64,
}

const fn row(range: f64, divergence_deg: f64, loss: f64, scintillation_index: f64, sigma2_x: f64) -> ChannelRow {
    ChannelRow {
        range,
        divergence_deg,
        loss,
        scintillation_index,
        sigma2_x,
    }
}

/// Collimated links at several ranges.
pub const COLLIMATED_ROWS: [ChannelRow; 6] = [
    row(90.0, 0.02, 3.99e-7, 0.9738, 0.17),
    row(70.0, 0.02, 7.812e-6, 0.616, 0.12),
    row(45.0, 0.02, 3.135e-4, 0.271, 0.06),
    row(30.0, 0.02, 3.1e-3, 0.1248, 0.029),
    row(22.5, 0.02, 9.4e-3, 0.071, 0.017),
    row(18.0, 0.02, 18.2e-3, 0.0452, 0.011),
];

/// Mixed collimated and diffuse links used for relay placement.
pub const PLACEMENT_ROWS: [ChannelRow; 8] = [
    row(30.0, 5.0, 2.5194e-4, 0.1248, 0.0294),
    row(35.0, 0.02, 1.4722e-3, 0.1681, 0.03884),
    row(27.5, 5.0, 3.8713e-4, 0.1054, 0.02505),
    row(40.0, 0.02, 6.9336e-4, 0.2169, 0.04907),
    row(25.0, 5.0, 6.1802e-4, 0.0873, 0.02093),
    row(22.5, 5.0, 1.0015e-3, 0.0712, 0.0172),
    row(50.0, 0.02, 1.5282e-4, 0.3303, 0.07136),
    row(20.0, 5.0, 1.6167e-3, 0.0559, 0.01361),
];

pub const WAVELENGTH: f64 = 532e-9;

/// CSV contents of the regenerated reference tables.
#[derive(Debug, Clone)]
pub struct ReferenceTables {
    pub interference: String,
    pub collimated: String,
    pub placement: String,
}

fn push_record(out: &mut csv::Writer<Vec<u8>>, fields: &[String]) {
    out.write_record(fields).expect("writing to memory");
}

fn finish(out: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(out.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
}

/// Interference characterisation for `users` users of an `(F, W)` code.
pub fn interference_csv(users: usize, ooc: OocParams) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    push_record(
        &mut out,
        &[
            "l",
            "prob_l",
            "total_patterns",
            "pattern",
            "conditional_prob",
            "similar_patterns",
            "fading_dimension",
        ]
        .map(String::from),
    );
    for r in interference_table(users, ooc)? {
        push_record(
            &mut out,
            &[
                r.l.to_string(),
                format!("{:.6e}", r.prob_l),
                r.total_patterns.to_string(),
                r.pattern.to_string(),
                format!("{:.6e}", r.conditional_prob),
                r.similar.to_string(),
                format!("N+{}", r.dimension_offset),
            ],
        );
    }
    Ok(finish(out))
}

fn channel_csv(rows: &[ChannelRow], turbulence: Option<&TurbulenceParams>) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    push_record(
        &mut out,
        &[
            "range_m",
            "divergence_deg",
            "loss",
            "scintillation_index_published",
            "sigma2_x_published",
            "sigma2_x_from_scintillation",
            "scintillation_index_computed",
            "relative_error",
        ]
        .map(String::from),
    );
    for r in rows {
        let sigma2_x = fading_from_scintillation(r.scintillation_index)?.sigma2_x;
        let computed = match turbulence {
            Some(t) => scintillation_index(t, r.range, WAVELENGTH)?,
            None => 0.0,
        };
        push_record(
            &mut out,
            &[
                r.range.to_string(),
                r.divergence_deg.to_string(),
                format!("{:e}", r.loss),
                r.scintillation_index.to_string(),
                r.sigma2_x.to_string(),
                format!("{sigma2_x:.6e}"),
                format!("{computed:.6e}"),
                format!("{:.4e}", computed / r.scintillation_index - 1.0),
            ],
        );
    }
    Ok(finish(out))
}

/// Regenerates the interference table for five users of a (50, 3) code and
/// both channel tables. `None` turbulence leaves the computed column at zero.
pub fn emit_reference_tables(turbulence: Option<&TurbulenceParams>) -> Result<ReferenceTables> {
    Ok(ReferenceTables {
        interference: interference_csv(5, OocParams::new(50, 3)?)?,
        collimated: channel_csv(&COLLIMATED_ROWS, turbulence)?,
        placement: channel_csv(&PLACEMENT_ROWS, turbulence)?,
    })
}
