//! Grounding metrics: box IoU, mask IoU, Acc@IoU and mIoU, overall and split
//! into "unique" and "multiple" descriptions.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Unique,
    Multiple,
}

impl Category {
    pub const ALL: [Category; 2] = [Category::Unique, Category::Multiple];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Unique => "unique",
            Category::Multiple => "multiple",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unique" => Ok(Category::Unique),
            "multiple" => Ok(Category::Multiple),
            other => Err(format!("unknown category `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub pred_mask: Vec<bool>,
    pub gt_mask: Vec<bool>,
    pub pred_box: Aabb,
    pub gt_box: Aabb,
    pub category: Category,
}

/// Intersection over union of two axis-aligned boxes.
pub fn box_iou_3d(a: &Aabb, b: &Aabb) -> f64 {
    let inter = a.intersection_volume(b);
    inter / (a.volume() + b.volume() - inter)
}

/// `|pred ∧ gt| / |pred ∨ gt|`; two empty masks score 1.
pub fn mask_iou(pred: &[bool], gt: &[bool]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            context: "mask length",
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        inter += usize::from(p && g);
        union += usize::from(p || g);
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stratum {
    pub count: usize,
    /// `(threshold, accuracy)` in the order the thresholds were given.
    pub accuracy: Vec<(f64, f64)>,
    pub miou: f64,
}

impl Stratum {
    pub fn acc_at(&self, threshold: f64) -> Option<f64> {
        self.accuracy
            .iter()
            .find(|(t, _)| *t == threshold)
            .map(|(_, a)| *a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    pub overall: Stratum,
    pub unique: Option<Stratum>,
    pub multiple: Option<Stratum>,
}

impl EvalReport {
    pub fn stratum(&self, category: Category) -> Option<&Stratum> {
        match category {
            Category::Unique => self.unique.as_ref(),
            Category::Multiple => self.multiple.as_ref(),
        }
    }
}

/// Running sums for one stratum; shards merge by addition.
#[derive(Debug, Clone, Default, PartialEq)]
struct Tally {
    count: usize,
    hits: Vec<usize>,
}

/// Accumulates disjoint shards separately; merging shards in a fixed order
/// gives a deterministic report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalAccumulator {
    thresholds: Vec<f64>,
    unique: Tally,
    multiple: Tally,
    /// Per-sample mask IoUs kept to sum in input order.
    ious: Vec<(Category, f64)>,
}

impl EvalAccumulator {
    pub fn new(thresholds: &[f64]) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(invalid("thresholds", "need at least one"));
        }
        if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(invalid("thresholds", format!("{t} not in (0, 1)")));
        }
        let empty = Tally {
            hits: vec![0; thresholds.len()],
            ..Default::default()
        };
        Ok(Self {
            thresholds: thresholds.to_vec(),
            unique: empty.clone(),
            multiple: empty,
            ious: Vec::new(),
        })
    }

    pub fn push(&mut self, sample: &EvalSample) -> Result<()> {
        let iou = mask_iou(&sample.pred_mask, &sample.gt_mask)?;
        let box_iou = box_iou_3d(&sample.pred_box, &sample.gt_box);
        let tally = match sample.category {
            Category::Unique => &mut self.unique,
            Category::Multiple => &mut self.multiple,
        };
        tally.count += 1;
        for (h, &t) in tally.hits.iter_mut().zip(&self.thresholds) {
            *h += usize::from(box_iou >= t);
        }
        self.ious.push((sample.category, iou));
        Ok(())
    }

    pub fn merge(mut self, other: EvalAccumulator) -> Result<Self> {
        if self.thresholds != other.thresholds {
            return Err(invalid("thresholds", "shards used different thresholds"));
        }
        for (mine, theirs) in [
            (&mut self.unique, &other.unique),
            (&mut self.multiple, &other.multiple),
        ] {
            mine.count += theirs.count;
            for (a, b) in mine.hits.iter_mut().zip(&theirs.hits) {
                *a += b;
            }
        }
        self.ious.extend(other.ious);
        Ok(self)
    }

    fn stratum(&self, count: usize, hits: &[usize], iou_sum: f64) -> Stratum {
        let n = count as f64;
        Stratum {
            count,
            accuracy: self
                .thresholds
                .iter()
                .zip(hits)
                .map(|(&t, &h)| (t, h as f64 / n))
                .collect(),
            miou: iou_sum / n,
        }
    }

    pub fn finish(&self) -> Result<EvalReport> {
        let total = self.unique.count + self.multiple.count;
        if total == 0 {
            return Err(Error::EmptyInput);
        }
        let sum_of = |c: Option<Category>| -> f64 {
            self.ious
                .iter()
                .filter(|(cat, _)| c.is_none_or(|c| c == *cat))
                .map(|(_, v)| v)
                .sum()
        };
        let all_hits: Vec<usize> = self
            .unique
            .hits
            .iter()
            .zip(&self.multiple.hits)
            .map(|(a, b)| a + b)
            .collect();
        let part = |t: &Tally, c: Category| {
            (t.count > 0).then(|| self.stratum(t.count, &t.hits, sum_of(Some(c))))
        };
        Ok(EvalReport {
            thresholds: self.thresholds.clone(),
            overall: self.stratum(total, &all_hits, sum_of(None)),
            unique: part(&self.unique, Category::Unique),
            multiple: part(&self.multiple, Category::Multiple),
        })
    }
}

/// Acc@t (box IoU `>= t`) and mean mask IoU over descriptions, overall and per
/// category.
pub fn evaluate(samples: &[EvalSample], thresholds: &[f64]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut acc = EvalAccumulator::new(thresholds)?;
    for s in samples {
        acc.push(s)?;
    }
    acc.finish()
}
