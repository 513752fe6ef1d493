#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::Rng;
use sacode_core::corpus::{AdviceItem, Category};
use sacode_core::{Answer, Code, CodingTree, Dataset, Event, Session};

/// The default tree written out by hand, independent of the tree module.
/// `None` while the answers have not reached a leaf; `Some(Err)` past one.
pub fn default_leaf(answers: &[bool]) -> Option<Result<&'static str, ()>> {
    use Node::*;
    enum Node {
        Q(usize),
        L(&'static str),
    }
    // index i is question Q(i+1): (yes, no)
    let table: [(Node, Node); 11] = [
        (Q(2), L("M1")),
        (Q(3), L("M2")),
        (Q(10), Q(4)),
        (Q(5), Q(9)),
        (Q(6), L("P1")),
        (Q(7), L("P3")),
        (L("P6"), Q(8)),
        (L("P4"), L("P5")),
        (L("P2"), L("Tprime")),
        (L("T"), Q(11)),
        (L("N1.1"), L("N1")),
    ];
    let mut at = 1;
    for (i, &yes) in answers.iter().enumerate() {
        let (y, n) = &table[at - 1];
        match if yes { y } else { n } {
            Q(next) => at = *next,
            L(code) => return Some(if i + 1 == answers.len() { Ok(code) } else { Err(()) }),
        }
    }
    None
}

pub fn tree() -> Arc<CodingTree> {
    Arc::new(CodingTree::default_tree())
}

pub fn synthetic_dataset(rng: &mut StdRng, items: usize) -> Dataset {
    let cats = rng.gen_range(1..=5);
    let categories: Vec<Category> = (0..cats)
        .map(|c| Category {
            category_id: format!("C{c}"),
            title: format!("Category {c}"),
        })
        .collect();
    let items = (0..items)
        .map(|i| AdviceItem {
            item_id: format!("S-{i}"),
            category_id: format!("C{}", rng.gen_range(0..cats)),
            text: format!("Synthetic advice item {i}"),
            notes: None,
        })
        .collect();
    Dataset {
        dataset_id: "synthetic".to_string(),
        title: "Synthetic".to_string(),
        categories,
        items,
    }
    .validate()
    .expect("synthetic dataset is valid")
}

/// A session driven by random answers, undos and pathless codes.
pub fn random_session(rng: &mut StdRng, dataset: &Dataset) -> Session {
    let mut s = Session::create(dataset, tree(), "synthetic");
    let ids = dataset.item_ids();
    let steps = rng.gen_range(0..ids.len() * 8 + 1);
    for _ in 0..steps {
        let id = &ids[rng.gen_range(0..ids.len())];
        match rng.gen_range(0..10) {
            0 => {
                let _ = s.undo(id);
            }
            1 => {
                let code = Code::ALL[rng.gen_range(0..Code::ALL.len())];
                let _ = s.record_code(id, code);
            }
            _ => {
                let a = if rng.gen_bool(0.5) { Answer::Yes } else { Answer::No };
                let _ = s.answer(id, a);
            }
        }
    }
    s
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Recount {
    pub coded: u64,
    pub totals: BTreeMap<String, u64>,
    pub per_category: BTreeMap<String, BTreeMap<String, u64>>,
    pub actionable: u64,
}

enum ItemFold {
    Answers(Vec<bool>),
    Pathless(&'static str),
}

/// Naive one-pass recount over the raw event log.
pub fn recount(session: &Session, dataset: &Dataset) -> Recount {
    let mut items: BTreeMap<String, ItemFold> = BTreeMap::new();
    for e in session.events() {
        match e {
            Event::Answered { item_id, answer, .. } => {
                let entry = items.entry(item_id.clone()).or_insert(ItemFold::Answers(Vec::new()));
                if let ItemFold::Answers(a) = entry {
                    a.push(*answer == Answer::Yes);
                }
            }
            Event::Undone { item_id, .. } => match items.get_mut(item_id) {
                Some(ItemFold::Answers(a)) => {
                    a.pop();
                }
                Some(ItemFold::Pathless(_)) => {
                    items.remove(item_id);
                }
                None => {}
            },
            Event::Finalized { item_id, code, .. } => {
                items.insert(item_id.clone(), ItemFold::Pathless(code.as_str()));
            }
            Event::TagsSet { .. } => {}
        }
    }
    let mut r = Recount::default();
    for (id, fold) in items {
        let code = match fold {
            ItemFold::Pathless(c) => c,
            ItemFold::Answers(a) => match default_leaf(&a) {
                Some(Ok(c)) => c,
                Some(Err(())) => panic!("answers past a leaf for {id}"),
                None => continue,
            },
        };
        let column = if code == "Tprime" { "T" } else { code };
        let cat = dataset.item(&id).unwrap().category_id.clone();
        r.coded += 1;
        *r.totals.entry(column.to_string()).or_default() += 1;
        *r.per_category.entry(cat).or_default().entry(column.to_string()).or_default() += 1;
        if matches!(column, "P3" | "P4" | "P5" | "P6") {
            r.actionable += 1;
        }
    }
    r
}

/// The same shape as [`Recount`], read from a frequency report.
pub fn from_report(report: &sacode_core::FrequencyReport) -> Recount {
    Recount {
        coded: report.coded_count,
        totals: report
            .totals
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|(c, &n)| (c.as_str().to_string(), n))
            .collect(),
        per_category: report
            .categories
            .iter()
            .filter(|c| !c.counts.is_empty())
            .map(|c| {
                (
                    c.category_id.clone(),
                    c.counts.iter().map(|(k, &n)| (k.as_str().to_string(), n)).collect(),
                )
            })
            .collect(),
        actionable: report.actionable.count,
    }
}

/// Cohen's kappa from an explicit confusion matrix over string labels.
pub fn kappa_oracle(pairs: &[(&str, &str)]) -> (f64, f64, f64) {
    let mut labels: Vec<&str> = pairs.iter().flat_map(|(a, b)| [*a, *b]).collect();
    labels.sort();
    labels.dedup();
    let k = labels.len();
    let idx = |l: &str| labels.iter().position(|x| *x == l).unwrap();
    let mut m = vec![vec![0f64; k]; k];
    for (a, b) in pairs {
        m[idx(a)][idx(b)] += 1.0;
    }
    let n = pairs.len() as f64;
    let po = (0..k).map(|i| m[i][i]).sum::<f64>() / n;
    let pe = (0..k)
        .map(|i| {
            let row: f64 = m[i].iter().sum();
            let col: f64 = (0..k).map(|j| m[j][i]).sum();
            row * col
        })
        .sum::<f64>()
        / (n * n);
    (po, pe, (po - pe) / (1.0 - pe))
}

/// Text with characters that stress the CSV and JSON encoders.
pub fn awkward_text(rng: &mut StdRng) -> String {
    const POOL: &[char] = &['a', 'Z', '7', ' ', ',', '"', '#', '|', ':', '\n', '\u{e9}', '\u{4e2d}', '-'];
    loop {
        let len = rng.gen_range(1..30);
        let s: String = (0..len).map(|_| POOL[rng.gen_range(0..POOL.len())]).collect();
        let s = s.trim().to_string();
        if !s.is_empty() {
            return s;
        }
    }
}

pub fn awkward_dataset(rng: &mut StdRng) -> Dataset {
    let cats = rng.gen_range(1..5);
    let categories: Vec<Category> = (0..cats)
        .map(|c| Category {
            category_id: format!("K{c}"),
            title: awkward_text(rng),
        })
        .collect();
    let n = rng.gen_range(0..20);
    let items = (0..n)
        .map(|i| AdviceItem {
            item_id: format!("A-{i}"),
            category_id: format!("K{}", rng.gen_range(0..cats)),
            text: awkward_text(rng),
            notes: rng.gen_bool(0.5).then(|| awkward_text(rng)),
        })
        .collect();
    Dataset {
        dataset_id: format!("awkward-{}", rng.gen_range(0..1000)),
        title: awkward_text(rng),
        categories,
        items,
    }
    .validate()
    .expect("generated dataset is valid")
}
