//! CSV layouts shared by several commands.

use std::path::Path;

use anyhow::{bail, Context};
use mlcbart::predict::{parse_pattern, pattern_string, LabelCombinationDistribution};

/// `instance_id` followed by one column per pattern (`000`, `001`, …).
pub fn write_distributions(path: &Path, dists: &[LabelCombinationDistribution]) -> anyhow::Result<()> {
    let Some(first) = dists.first() else {
        bail!("no distributions to write");
    };
    let q = first.n_labels();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["instance_id".to_string()];
    header.extend((0..1 << q).map(|p| pattern_string(p, q)));
    w.write_record(&header)?;
    for (i, d) in dists.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(d.probabilities().iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_distributions(path: &Path) -> anyhow::Result<Vec<LabelCombinationDistribution>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    if header.get(0) != Some("instance_id") {
        bail!("{}: first column must be instance_id", path.display());
    }
    let cols: Vec<(usize, usize)> = header.iter().skip(1).map(parse_pattern).collect::<Result<_, _>>()?;
    let q = cols.first().map(|c| c.0).unwrap_or(0);
    if cols.len() != 1 << q || cols.iter().any(|c| c.0 != q) {
        bail!("{}: expected one column per label pattern", path.display());
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut probs = vec![0.0; 1 << q];
        for (a, (_, idx)) in cols.iter().enumerate() {
            let cell = rec.get(a + 1).unwrap_or("");
            probs[*idx] = cell
                .trim()
                .parse()
                .with_context(|| format!("{} row {}: bad probability '{cell}'", path.display(), row + 1))?;
        }
        out.push(
            LabelCombinationDistribution::new(q, probs)
                .with_context(|| format!("{} row {}", path.display(), row + 1))?,
        );
    }
    Ok(out)
}
