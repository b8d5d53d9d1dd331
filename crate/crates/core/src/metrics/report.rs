use serde::{Deserialize, Serialize};

use super::rouge::Prf;
use super::MetricError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: f64,
    pub rouge1: Prf,
    pub rouge2: Prf,
    #[serde(rename = "rougeL")]
    pub rouge_l: Prf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<Prf>,
}

impl MetricReport {
    /// Every value, labeled, in column order.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![("bleu", self.bleu)];
        for (name, prf) in [("rouge1", &self.rouge1), ("rouge2", &self.rouge2), ("rougeL", &self.rouge_l)] {
            push_prf(&mut out, name, prf);
        }
        if let Some(p) = &self.parent {
            push_prf(&mut out, "parent", p);
        }
        out
    }

    /// Componentwise `self - other`. PARENT is kept only if both sides have it.
    pub fn minus(&self, other: &MetricReport) -> MetricReport {
        let d = |a: &Prf, b: &Prf| Prf {
            precision: a.precision - b.precision,
            recall: a.recall - b.recall,
            f: a.f - b.f,
        };
        MetricReport {
            bleu: self.bleu - other.bleu,
            rouge1: d(&self.rouge1, &other.rouge1),
            rouge2: d(&self.rouge2, &other.rouge2),
            rouge_l: d(&self.rouge_l, &other.rouge_l),
            parent: match (&self.parent, &other.parent) {
                (Some(a), Some(b)) => Some(d(a, b)),
                _ => None,
            },
        }
    }
}

fn push_prf(out: &mut Vec<(&'static str, f64)>, name: &'static str, prf: &Prf) {
    let labels: [&'static str; 3] = match name {
        "rouge1" => ["rouge1.p", "rouge1.r", "rouge1.f"],
        "rouge2" => ["rouge2.p", "rouge2.r", "rouge2.f"],
        "rougeL" => ["rougeL.p", "rougeL.r", "rougeL.f"],
        _ => ["parent.p", "parent.r", "parent.f"],
    };
    out.push((labels[0], prf.precision));
    out.push((labels[1], prf.recall));
    out.push((labels[2], prf.f));
}

/// Mean of a list of reports. PARENT is averaged over the reports that carry it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub count: usize,
    #[serde(flatten)]
    pub mean: MetricReport,
    #[serde(default)]
    pub parent_count: usize,
}

fn mean_prf<'a>(items: impl Iterator<Item = &'a Prf>) -> Option<(Prf, usize)> {
    let (mut p, mut r, mut f, mut n) = (0.0, 0.0, 0.0, 0usize);
    for x in items {
        p += x.precision;
        r += x.recall;
        f += x.f;
        n += 1;
    }
    (n > 0).then(|| {
        let k = n as f64;
        (Prf { precision: p / k, recall: r / k, f: f / k }, n)
    })
}

pub fn aggregate(reports: &[MetricReport]) -> Result<AggregateReport, MetricError> {
    if reports.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let n = reports.len() as f64;
    let parent = mean_prf(reports.iter().filter_map(|r| r.parent.as_ref()));
    let (Some((rouge1, _)), Some((rouge2, _)), Some((rouge_l, _))) = (
        mean_prf(reports.iter().map(|r| &r.rouge1)),
        mean_prf(reports.iter().map(|r| &r.rouge2)),
        mean_prf(reports.iter().map(|r| &r.rouge_l)),
    ) else {
        unreachable!("reports is non-empty");
    };
    Ok(AggregateReport {
        count: reports.len(),
        mean: MetricReport {
            bleu: reports.iter().map(|r| r.bleu).sum::<f64>() / n,
            rouge1,
            rouge2,
            rouge_l,
            parent: parent.map(|(p, _)| p),
        },
        parent_count: parent.map_or(0, |(_, c)| c),
    })
}
