//! Golden wire dumps, the two figure scenarios and the statistical test setup.

use anyhow::{Context, Result};
use serde::Serialize;
use snpd_core::protocol::golden::golden_frames;
use snpd_core::protocol::ProtocolParams;
use snpd_core::sim::fixtures::{exact_params, fig3, fig4, Fixture};
use snpd_core::sim::RadioModel;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// Overheard REPLYs in the golden REPORT.
pub const GOLDEN_REPORT_ENTRIES: usize = 5;
/// Seed of the recorded figure runs.
pub const FIXTURE_SEED: u64 = 0;

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct NodeRecord<'a> {
    id: u32,
    label: &'a str,
    x: f64,
    y: f64,
    strategy: String,
    verdict: Option<String>,
}

#[derive(Serialize)]
struct FixtureRecord<'a> {
    name: &'a str,
    seed: u64,
    verifier: &'a str,
    params: &'a ProtocolParams,
    radio: &'a RadioModel,
    nodes: Vec<NodeRecord<'a>>,
}

fn record(f: &Fixture) -> FixtureRecord<'_> {
    let result = f.run(FIXTURE_SEED);
    let nodes = f
        .positions
        .iter()
        .map(|(id, p)| NodeRecord {
            id: id.0,
            label: f.label(*id),
            x: p.x,
            y: p.y,
            strategy: f
                .strategies
                .get(id)
                .map_or("honest".to_string(), |s| s.kind().to_string()),
            verdict: result
                .classification
                .verdict(*id)
                .map(|v| format!("{v:?}").to_lowercase()),
        })
        .collect();
    FixtureRecord {
        name: &f.name,
        seed: FIXTURE_SEED,
        verifier: f.label(f.verifier),
        params: &f.params,
        radio: &f.radio,
        nodes,
    }
}

/// Knowledgeable-adversary clique trials per common-neighbor count.
#[derive(Serialize)]
struct Security1a {
    trials: usize,
    seed: u64,
    common_neighbors: Vec<usize>,
    params: ProtocolParams,
}

/// File name and contents of every fixture, in a fixed order.
pub fn fixture_files() -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let frames = golden_frames(GOLDEN_REPORT_ENTRIES);
    for (name, bytes) in ["poll", "reply", "reveal", "report"].iter().zip(&frames) {
        files.insert(
            format!("wire/{name}.hex"),
            format!("{}\n", hex(bytes)).into_bytes(),
        );
    }
    for f in [fig3(), fig4()] {
        let mut json = serde_json::to_vec_pretty(&record(&f))?;
        json.push(b'\n');
        files.insert(format!("{}.json", f.name), json);
    }
    let table = Security1a {
        trials: 2000,
        seed: 1,
        common_neighbors: vec![1, 2, 3, 4],
        params: exact_params(),
    };
    files.insert(
        "security_1a.toml".to_string(),
        toml::to_string(&table)?.into_bytes(),
    );
    Ok(files)
}

pub fn write_fixtures(dir: &Path) -> Result<()> {
    for (name, bytes) in fixture_files()? {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
