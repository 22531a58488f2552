use std::collections::BTreeMap;
use std::ops::AddAssign;

use super::reader::ConnectionRecord;

/// Instance count per raw label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelCensus {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl LabelCensus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, label: &str) {
        self.add_n(label, 1);
    }

    pub fn add_n(&mut self, label: &str, n: u64) {
        if let Some(c) = self.counts.get_mut(label) {
            *c += n;
        } else {
            self.counts.insert(label.to_owned(), n);
        }
        self.total += n;
    }

    pub fn from_records<'a, I>(records: I) -> Self
    where
        I: IntoIterator<Item = &'a ConnectionRecord>,
    {
        let mut census = Self::new();
        for r in records {
            census.add(&r.label);
        }
        census
    }

    pub fn merge(&mut self, other: &LabelCensus) {
        for (label, n) in &other.counts {
            self.add_n(label, *n);
        }
    }

    pub fn get(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Labels by descending count, ties by label.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut rows: Vec<(&str, u64)> = self.counts.iter().map(|(l, n)| (l.as_str(), *n)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        rows
    }

    /// `label,count` CSV sorted by descending count, closed by a `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,count\n");
        for (label, n) in self.sorted() {
            out.push_str(&format!("{label},{n}\n"));
        }
        out.push_str(&format!("total,{}\n", self.total));
        out
    }

    /// Inverse of [`LabelCensus::to_csv`].
    pub fn from_csv(text: &str) -> Option<Self> {
        let mut census = Self::new();
        let mut total = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (label, count) = line.split_once(',')?;
            if label == "label" {
                continue;
            }
            let n: u64 = count.trim().parse().ok()?;
            if label == "total" {
                total = Some(n);
            } else {
                census.add_n(label, n);
            }
        }
        (total == Some(census.total)).then_some(census)
    }
}

impl AddAssign<&LabelCensus> for LabelCensus {
    fn add_assign(&mut self, rhs: &LabelCensus) {
        self.merge(rhs);
    }
}
