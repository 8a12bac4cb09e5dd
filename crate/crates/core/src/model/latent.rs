//! Export of latent vectors for external projection.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;

use super::encoder::sample_z;
use super::Model;
use crate::labels::Label;
use crate::sketch::Sketch;

/// The receiver type most of the sketch's calls go to (ties broken by
/// name), or `none` for call-free sketches.
pub fn api_label(y: &Sketch) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in y.calls() {
        *counts.entry(c.receiver.as_str()).or_default() += 1;
    }
    let best = counts.iter().fold(None, |best: Option<(&str, usize)>, (&k, &n)| match best {
        Some((_, m)) if m >= n => best,
        _ => Some((k, n)),
    });
    best.map_or_else(|| "none".to_string(), |(k, _)| k.to_string())
}

/// Writes one CSV row `z_1..z_d, api_label` per record, with `z` drawn from
/// the posterior of the record's label.
pub fn export_latent<W: Write, R: Rng + ?Sized>(
    model: &Model,
    records: &[(Label, Sketch)],
    rng: &mut R,
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let d = model.hyper.d;
    let mut header: Vec<String> = (1..=d).map(|i| format!("z_{i}")).collect();
    header.push("api_label".into());
    w.write_record(&header)?;
    for (x, y) in records {
        let z = sample_z(&model.posterior(x), rng);
        let mut row: Vec<String> = z.iter().map(|v| v.to_string()).collect();
        row.push(api_label(y));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
