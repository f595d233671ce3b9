//! Attention score export, one JSON object per line.

use std::io::Write;

use serde::Serialize;

use super::forward::{ForwardTrace, ListTrace};
use crate::data::{InteractionDataset, PADDING_ITEM};
use crate::error::Result;

#[derive(Debug, Serialize)]
struct ListRecord<'a> {
    list: Option<&'a str>,
    /// Item IDs per slot; `null` marks padding.
    items: Vec<Option<&'a str>>,
    self_attention: Vec<Vec<f64>>,
    alpha: &'a [f64],
}

#[derive(Debug, Serialize)]
struct Record<'a> {
    user: &'a str,
    candidate: ListRecord<'a>,
    profile: Vec<ListRecord<'a>>,
    profile_lists: Vec<Option<&'a str>>,
    list_self_attention: Vec<Vec<f64>>,
    beta: &'a [f64],
    score: f64,
}

fn grid(flat: &[f64], n: usize) -> Vec<Vec<f64>> {
    if flat.is_empty() {
        return Vec::new();
    }
    flat.chunks(n).map(<[f64]>::to_vec).collect()
}

fn list_record<'a>(ds: &'a InteractionDataset, t: &'a ListTrace) -> ListRecord<'a> {
    ListRecord {
        list: t.list.map(|l| ds.list_ids()[l].as_str()),
        items: t
            .items
            .iter()
            .map(|&r| (r != PADDING_ITEM).then(|| ds.item_ids()[r - 1].as_str()))
            .collect(),
        self_attention: grid(&t.f, t.items.len()),
        alpha: &t.alpha,
    }
}

/// Writes one record for `trace`, with dataset IDs attached to every row
/// and column of the score grids.
pub fn export_attention<W: Write>(trace: &ForwardTrace, ds: &InteractionDataset, sink: &mut W) -> Result<()> {
    let profile: Vec<ListRecord> = trace
        .profile
        .iter()
        .zip(&trace.profile_mask)
        .filter(|(_, &live)| live)
        .map(|(t, _)| list_record(ds, t))
        .collect();
    let record = Record {
        user: &ds.user_ids()[trace.user],
        candidate: list_record(ds, &trace.candidate),
        profile,
        profile_lists: trace
            .profile
            .iter()
            .map(|t| t.list.map(|l| ds.list_ids()[l].as_str()))
            .collect(),
        list_self_attention: grid(&trace.g, trace.profile.len()),
        beta: &trace.beta,
        score: trace.score,
    };
    serde_json::to_writer(&mut *sink, &record)?;
    sink.write_all(b"\n")?;
    Ok(())
}
