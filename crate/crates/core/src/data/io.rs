//! Text file formats.
//!
//! Raw input:
//! * interactions: `user-id<TAB>list-id` per line, in interaction order
//! * containment: `list-id<TAB>item-id<TAB>position`, 0-based curation order
//!
//! A prepared dataset directory holds the same two files (interactions gain a
//! third `split` column) plus `manifest.json` carrying the dense index maps.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{DatasetSummary, Interaction, InteractionDataset, Split};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const CONTAINMENT_FILE: &str = "containment.tsv";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Items contained in fewer lists than this are removed.
    pub min_item_frequency: usize,
    /// Users with fewer interactions than this are removed.
    pub min_user_interactions: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            min_item_frequency: 5,
            min_user_interactions: 0,
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-empty lines split on tabs, with 1-based line numbers.
fn read_records(path: &Path, fields: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<String> = line.split('\t').map(str::to_string).collect();
        if parts.len() != fields || parts.iter().any(|p| p.is_empty()) {
            return Err(parse_err(
                path,
                n + 1,
                format!("expected {fields} tab-separated fields, found {}", parts.len()),
            ));
        }
        out.push((n + 1, parts));
    }
    Ok(out)
}

struct RawContainment {
    list_order: Vec<String>,
    contents: HashMap<String, Vec<(u64, String)>>,
}

fn read_containment(path: &Path) -> Result<RawContainment> {
    let mut list_order = Vec::new();
    let mut contents: HashMap<String, Vec<(u64, String)>> = HashMap::new();
    for (line, rec) in read_records(path, 3)? {
        let [list, item, pos] = <[String; 3]>::try_from(rec).expect("field count checked");
        let pos: u64 = pos
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("position `{pos}` is not a non-negative integer")))?;
        let entry = contents.entry(list.clone()).or_insert_with(|| {
            list_order.push(list.clone());
            Vec::new()
        });
        entry.push((pos, item));
    }
    for items in contents.values_mut() {
        items.sort_by_key(|(p, _)| *p);
    }
    Ok(RawContainment { list_order, contents })
}

/// Loads raw interaction and containment files, remaps string IDs to dense
/// indices, and applies the frequency filters. Every interaction is tagged
/// [`Split::Train`]; see [`super::split_dataset`].
pub fn load_dataset(interactions: &Path, containment: &Path, opts: &LoadOptions) -> Result<InteractionDataset> {
    let raw = read_containment(containment)?;

    // item frequency = number of distinct lists containing the item
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for list in &raw.list_order {
        let distinct: HashSet<&str> = raw.contents[list].iter().map(|(_, i)| i.as_str()).collect();
        for i in distinct {
            *freq.entry(i).or_default() += 1;
        }
    }

    let mut item_index: HashMap<String, usize> = HashMap::new();
    let mut item_ids = Vec::new();
    let mut lists = Vec::with_capacity(raw.list_order.len());
    let mut list_index: HashMap<&str, usize> = HashMap::new();
    for (l, list) in raw.list_order.iter().enumerate() {
        list_index.insert(list.as_str(), l);
        let mut items = Vec::new();
        for (_, item) in &raw.contents[list] {
            if freq[item.as_str()] < opts.min_item_frequency {
                continue;
            }
            let idx = *item_index.entry(item.clone()).or_insert_with(|| {
                item_ids.push(item.clone());
                item_ids.len() - 1
            });
            items.push(idx);
        }
        lists.push(items);
    }
    let dropped = freq.len() - item_ids.len();
    if dropped > 0 {
        log::info!(
            "dropped {dropped} items appearing in fewer than {} lists",
            opts.min_item_frequency
        );
    }

    let mut pairs: Vec<(String, usize)> = Vec::new();
    let mut seen = HashSet::new();
    for (line, rec) in read_records(interactions, 2)? {
        let [user, list] = <[String; 2]>::try_from(rec).expect("field count checked");
        let Some(&l) = list_index.get(list.as_str()) else {
            return Err(Error::Referential(format!(
                "{}:{line}: list `{list}` has no containment records",
                interactions.display()
            )));
        };
        if seen.insert((user.clone(), l)) {
            pairs.push((user, l));
        } else {
            log::warn!("{}:{line}: duplicate interaction skipped", interactions.display());
        }
    }
    if pairs.is_empty() {
        return Err(Error::Validation("no interactions".into()));
    }

    let mut per_user: HashMap<&str, usize> = HashMap::new();
    for (u, _) in &pairs {
        *per_user.entry(u.as_str()).or_default() += 1;
    }
    let mut user_index: HashMap<String, usize> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut out = Vec::with_capacity(pairs.len());
    for (u, l) in &pairs {
        if per_user[u.as_str()] < opts.min_user_interactions {
            continue;
        }
        let user = *user_index.entry(u.clone()).or_insert_with(|| {
            user_ids.push(u.clone());
            user_ids.len() - 1
        });
        out.push(Interaction {
            user,
            list: *l,
            split: Split::Train,
        });
    }
    if out.is_empty() {
        return Err(Error::Validation("no interactions left after user filtering".into()));
    }

    InteractionDataset::new(user_ids, raw.list_order, item_ids, lists, out)
}

/// Provenance stored next to a prepared dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub user_ids: Vec<String>,
    pub list_ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub split_seed: u64,
    pub split_fractions: [f64; 3],
    pub max_profile_lists: usize,
    pub max_list_items: usize,
    pub load: LoadOptions,
    /// How interaction order is established.
    pub interaction_order: String,
    /// Which train lists populate a user profile when there are more than N.
    pub profile_selection: String,
    /// Embedding row reserved for padding; real item `i` uses row `i + 1`.
    pub padding_item: usize,
    pub summary: DatasetSummary,
    pub fingerprint: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrepareSettings {
    pub split_seed: u64,
    pub split_fractions: [f64; 3],
    pub max_profile_lists: usize,
    pub max_list_items: usize,
    pub load: LoadOptions,
}

impl Manifest {
    pub fn describe(ds: &InteractionDataset, settings: &PrepareSettings) -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            user_ids: ds.user_ids().to_vec(),
            list_ids: ds.list_ids().to_vec(),
            item_ids: ds.item_ids().to_vec(),
            split_seed: settings.split_seed,
            split_fractions: settings.split_fractions,
            max_profile_lists: settings.max_profile_lists,
            max_list_items: settings.max_list_items,
            load: settings.load,
            interaction_order: "file-order".into(),
            profile_selection: "most-recent-n-train-lists-by-file-order".into(),
            padding_item: 0,
            summary: ds.summary(),
            fingerprint: ds.fingerprint(),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

/// Writes the two data files plus `manifest.json` into `dir`.
pub fn save_prepared(ds: &InteractionDataset, dir: &Path, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_interactions(ds, &dir.join(INTERACTIONS_FILE), true)?;
    write_containment(ds, &dir.join(CONTAINMENT_FILE))?;
    let mut f = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(&mut f, manifest)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn write_interactions(ds: &InteractionDataset, path: &Path, with_split: bool) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for it in ds.interactions() {
        let (u, l) = (&ds.user_ids()[it.user], &ds.list_ids()[it.list]);
        if with_split {
            writeln!(f, "{u}\t{l}\t{}", it.split.as_str())?;
        } else {
            writeln!(f, "{u}\t{l}")?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn write_containment(ds: &InteractionDataset, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for (l, items) in ds.lists().iter().enumerate() {
        for (pos, &i) in items.iter().enumerate() {
            writeln!(f, "{}\t{}\t{pos}", ds.list_ids()[l], ds.item_ids()[i])?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let f = File::open(dir.join(MANIFEST_FILE))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

/// Reloads a directory written by [`save_prepared`].
pub fn load_prepared(dir: &Path) -> Result<(InteractionDataset, Manifest)> {
    let manifest = read_manifest(dir)?;
    let index = |ids: &[String]| -> HashMap<String, usize> {
        ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect()
    };
    let users = index(&manifest.user_ids);
    let lists = index(&manifest.list_ids);
    let items = index(&manifest.item_ids);

    let cpath: PathBuf = dir.join(CONTAINMENT_FILE);
    let mut contents: Vec<Vec<(u64, usize)>> = vec![Vec::new(); manifest.list_ids.len()];
    for (line, rec) in read_records(&cpath, 3)? {
        let l = *lists
            .get(&rec[0])
            .ok_or_else(|| parse_err(&cpath, line, format!("unknown list `{}`", rec[0])))?;
        let i = *items
            .get(&rec[1])
            .ok_or_else(|| parse_err(&cpath, line, format!("unknown item `{}`", rec[1])))?;
        let p: u64 = rec[2]
            .parse()
            .map_err(|_| parse_err(&cpath, line, "bad position"))?;
        contents[l].push((p, i));
    }
    let contents = contents
        .into_iter()
        .map(|mut v| {
            v.sort_by_key(|(p, _)| *p);
            v.into_iter().map(|(_, i)| i).collect()
        })
        .collect();

    let ipath = dir.join(INTERACTIONS_FILE);
    let mut interactions = Vec::new();
    for (line, rec) in read_records(&ipath, 3)? {
        let user = *users
            .get(&rec[0])
            .ok_or_else(|| parse_err(&ipath, line, format!("unknown user `{}`", rec[0])))?;
        let list = *lists
            .get(&rec[1])
            .ok_or_else(|| parse_err(&ipath, line, format!("unknown list `{}`", rec[1])))?;
        let split = Split::parse(&rec[2]).ok_or_else(|| parse_err(&ipath, line, format!("bad split `{}`", rec[2])))?;
        interactions.push(Interaction { user, list, split });
    }

    let ds = InteractionDataset::new(
        manifest.user_ids.clone(),
        manifest.list_ids.clone(),
        manifest.item_ids.clone(),
        contents,
        interactions,
    )?;
    if ds.fingerprint() != manifest.fingerprint {
        return Err(Error::Validation(format!(
            "dataset in {} does not match its manifest fingerprint",
            dir.display()
        )));
    }
    Ok((ds, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn loads_small_files_without_filtering() {
        let dir = tempfile::tempdir().unwrap();
        let i = write(dir.path(), "i.tsv", "alice\tL1\nbob\tL1\nalice\tL2\n");
        let c = write(dir.path(), "c.tsv", "L1\tx\t1\nL1\ty\t0\nL2\tz\t0\n");
        let ds = load_dataset(&i, &c, &LoadOptions { min_item_frequency: 1, min_user_interactions: 0 }).unwrap();
        assert_eq!(ds.interaction_count(), 3);
        assert_eq!(ds.n_users(), 2);
        assert_eq!(ds.n_lists(), 2);
        assert_eq!(ds.n_items(), 3);
        // curation order follows the position column
        let names: Vec<&str> = ds.list_items(0).iter().map(|&i| ds.item_ids()[i].as_str()).collect();
        assert_eq!(names, vec!["y", "x"]);
    }

    #[test]
    fn infrequent_items_are_removed_and_lists_kept() {
        let dir = tempfile::tempdir().unwrap();
        // `rare` is in 4 lists, `common` in 5; L5 holds only `solo`
        let mut c = String::new();
        for l in 0..5 {
            c += &format!("L{l}\tcommon\t0\n");
            if l < 4 {
                c += &format!("L{l}\trare\t1\n");
            }
        }
        c += "L5\tsolo\t0\n";
        let c = write(dir.path(), "c.tsv", &c);
        let i = write(dir.path(), "i.tsv", "u\tL0\nu\tL5\n");
        let ds = load_dataset(&i, &c, &LoadOptions { min_item_frequency: 5, min_user_interactions: 0 }).unwrap();
        assert!(!ds.item_ids().iter().any(|s| s == "rare"));
        assert_eq!(ds.n_items(), 1);
        assert!(ds.lists().iter().take(5).all(|l| l.len() == 1));
        assert_eq!(ds.n_lists(), 6);
        assert!(ds.list_items(5).is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let i = write(dir.path(), "i.tsv", "a\tL1\nbroken line\n");
        let c = write(dir.path(), "c.tsv", "L1\tx\t0\n");
        match load_dataset(&i, &c, &LoadOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let c2 = write(dir.path(), "c2.tsv", "L1\tx\tfirst\n");
        let i2 = write(dir.path(), "i2.tsv", "a\tL1\n");
        assert!(matches!(load_dataset(&i2, &c2, &LoadOptions::default()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn unknown_list_is_referential_error() {
        let dir = tempfile::tempdir().unwrap();
        let i = write(dir.path(), "i.tsv", "a\tL9\n");
        let c = write(dir.path(), "c.tsv", "L1\tx\t0\n");
        assert!(matches!(load_dataset(&i, &c, &LoadOptions::default()), Err(Error::Referential(_))));
    }

    #[test]
    fn empty_interactions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let i = write(dir.path(), "i.tsv", "");
        let c = write(dir.path(), "c.tsv", "L1\tx\t0\n");
        let err = load_dataset(&i, &c, &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("no interactions"));
    }

    #[test]
    fn min_user_interactions_filter() {
        let dir = tempfile::tempdir().unwrap();
        let i = write(dir.path(), "i.tsv", "a\tL1\na\tL2\nb\tL1\n");
        let c = write(dir.path(), "c.tsv", "L1\tx\t0\nL2\tx\t0\n");
        let ds = load_dataset(&i, &c, &LoadOptions { min_item_frequency: 1, min_user_interactions: 2 }).unwrap();
        assert_eq!(ds.user_ids(), &["a".to_string()]);
        assert_eq!(ds.interaction_count(), 2);
    }
}
