//! Synthetic KDD-format traffic with label-dependent feature profiles, for
//! tests, fixtures and runs without the real corpus.

use std::collections::HashMap;
use std::io::{self, Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{ConnectionRecord, FeatureSchema};
use crate::preprocess::{AttackTaxonomy, Category};

/// Share of records drawn from another label's profile while keeping their
/// own label, so that no classifier is perfect.
pub const DEFAULT_NOISE: f64 = 0.03;

pub struct Generator {
    schema: FeatureSchema,
    cols: HashMap<String, usize>,
    taxonomy: AttackTaxonomy,
    noise: f64,
}

struct Row<'g> {
    g: &'g Generator,
    values: Vec<f64>,
}

impl Row<'_> {
    fn set(&mut self, name: &str, v: f64) -> &mut Self {
        self.values[self.g.cols[name]] = v;
        self
    }

    fn sym(&mut self, name: &str, symbol: &str) -> &mut Self {
        let c = self.g.cols[name];
        self.values[c] = self.g.schema.symbol_index(c, symbol).expect("nominal column") as f64;
        self
    }
}

/// Clamped to `[0, 1]` with two decimals, as rates appear in the corpus.
fn rate(x: f64) -> f64 {
    (x.clamp(0.0, 1.0) * 100.0).round() / 100.0
}

fn pick<'a>(rng: &mut impl Rng, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

impl Generator {
    /// Generator for the shipped schema.
    pub fn kdd99() -> Self {
        Self::new(FeatureSchema::kdd99(), DEFAULT_NOISE)
    }

    pub fn new(schema: FeatureSchema, noise: f64) -> Self {
        let cols = schema.columns().iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
        Self { schema, cols, taxonomy: AttackTaxonomy::kdd99(), noise }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn record(&self, label: &str, rng: &mut impl Rng) -> ConnectionRecord {
        let profile = if rng.random_bool(self.noise) {
            const DECOYS: [&str; 6] = ["normal", "smurf", "neptune", "satan", "warezclient", "ipsweep"];
            pick(rng, &DECOYS)
        } else {
            label
        };
        let mut row = Row { g: self, values: vec![0.0; self.schema.len()] };
        self.fill(&mut row, profile, rng);
        ConnectionRecord { values: row.values, label: label.to_string() }
    }

    fn traffic(&self, row: &mut Row, rng: &mut impl Rng, busy: bool, serror: f64, rerror: f64, same_srv: f64) {
        let count = if busy { rng.random_range(100..512) } else { rng.random_range(1..30) } as f64;
        let srv = (count * same_srv).round().max(1.0);
        let host = rng.random_range(1..=255) as f64;
        let host_srv = (host * same_srv).round().max(1.0);
        let j = |rng: &mut ChaCha8Rng, p: f64| rate(p + rng.random_range(-0.05..0.05));
        let mut r = ChaCha8Rng::seed_from_u64(rng.random());
        row.set("count", count)
            .set("srv_count", srv)
            .set("serror_rate", j(&mut r, serror))
            .set("srv_serror_rate", j(&mut r, serror))
            .set("rerror_rate", j(&mut r, rerror))
            .set("srv_rerror_rate", j(&mut r, rerror))
            .set("same_srv_rate", j(&mut r, same_srv))
            .set("diff_srv_rate", j(&mut r, 1.0 - same_srv))
            .set("srv_diff_host_rate", j(&mut r, 0.1))
            .set("dst_host_count", host)
            .set("dst_host_srv_count", host_srv)
            .set("dst_host_same_srv_rate", j(&mut r, same_srv))
            .set("dst_host_diff_srv_rate", j(&mut r, 1.0 - same_srv))
            .set("dst_host_same_src_port_rate", j(&mut r, if busy { 0.8 } else { 0.1 }))
            .set("dst_host_srv_diff_host_rate", j(&mut r, 0.05))
            .set("dst_host_serror_rate", j(&mut r, serror))
            .set("dst_host_srv_serror_rate", j(&mut r, serror))
            .set("dst_host_rerror_rate", j(&mut r, rerror))
            .set("dst_host_srv_rerror_rate", j(&mut r, rerror));
    }

    fn login(&self, row: &mut Row, rng: &mut impl Rng, service: &str) {
        row.sym("protocol_type", "tcp")
            .sym("service", service)
            .sym("flag", "SF")
            .set("logged_in", 1.0)
            .set("duration", rng.random_range(0..3000) as f64)
            .set("src_bytes", rng.random_range(100..5000) as f64)
            .set("dst_bytes", rng.random_range(0..20000) as f64);
        self.traffic(row, rng, false, 0.0, 0.0, 0.9);
    }

    fn fill(&self, row: &mut Row, label: &str, rng: &mut impl Rng) {
        match label {
            "smurf" | "pod" => {
                row.sym("protocol_type", "icmp").sym("service", "ecr_i").sym("flag", "SF");
                if label == "smurf" {
                    row.set("src_bytes", if rng.random_bool(0.5) { 520.0 } else { 1032.0 });
                    self.traffic(row, rng, true, 0.0, 0.0, 1.0);
                } else {
                    row.set("src_bytes", 1480.0).set("wrong_fragment", 1.0);
                    self.traffic(row, rng, false, 0.0, 0.0, 1.0);
                }
            }
            "neptune" | "land" => {
                let service = pick(rng, &["private", "http", "telnet", "ftp", "finger", "other"]);
                row.sym("protocol_type", "tcp").sym("service", service).sym("flag", "S0");
                if label == "land" {
                    row.set("land", 1.0);
                }
                self.traffic(row, rng, true, 1.0, 0.0, 0.05);
            }
            "back" => {
                row.sym("protocol_type", "tcp")
                    .sym("service", "http")
                    .sym("flag", "SF")
                    .set("src_bytes", 54540.0)
                    .set("dst_bytes", rng.random_range(7000..9000) as f64)
                    .set("hot", 2.0)
                    .set("logged_in", 1.0)
                    .set("num_compromised", 1.0);
                self.traffic(row, rng, false, 0.0, 0.0, 1.0);
            }
            "teardrop" => {
                row.sym("protocol_type", "udp").sym("service", "private").sym("flag", "SF");
                row.set("src_bytes", 28.0).set("wrong_fragment", 3.0);
                self.traffic(row, rng, false, 0.0, 0.0, 0.9);
            }
            "ipsweep" => {
                row.sym("protocol_type", "icmp").sym("service", "eco_i").sym("flag", "SF").set("src_bytes", 8.0);
                self.traffic(row, rng, false, 0.0, 0.0, 1.0);
                row.set("dst_host_srv_diff_host_rate", rate(rng.random_range(0.4..1.0)));
            }
            "nmap" => {
                let proto = pick(rng, &["icmp", "tcp", "udp"]);
                let service = match proto {
                    "icmp" => "eco_i",
                    "tcp" => "private",
                    _ => "private",
                };
                row.sym("protocol_type", proto).sym("service", service).sym("flag", "SH");
                self.traffic(row, rng, false, 0.5, 0.2, 0.1);
            }
            "portsweep" => {
                row.sym("protocol_type", "tcp").sym("service", "private").sym("flag", pick(rng, &["REJ", "RSTR"]));
                row.set("duration", rng.random_range(0..5) as f64);
                self.traffic(row, rng, false, 0.0, 0.9, 0.1);
                row.set("dst_host_srv_rerror_rate", rate(rng.random_range(0.7..1.0)));
            }
            "satan" => {
                let service = pick(rng, &["private", "other", "finger", "telnet", "ftp_data", "smtp", "domain"]);
                row.sym("protocol_type", "tcp").sym("service", service).sym("flag", pick(rng, &["REJ", "S0", "RSTO"]));
                self.traffic(row, rng, true, 0.1, 0.8, 0.05);
            }
            "warezclient" | "warezmaster" => {
                row.sym("protocol_type", "tcp")
                    .sym("service", if label == "warezclient" { "ftp_data" } else { "ftp" })
                    .sym("flag", "SF")
                    .set("logged_in", 1.0)
                    .set("is_guest_login", 1.0)
                    .set("duration", rng.random_range(0..800) as f64)
                    .set("src_bytes", rng.random_range(100_000..3_000_000) as f64)
                    .set("hot", rng.random_range(0..30) as f64);
                self.traffic(row, rng, false, 0.0, 0.0, 0.7);
            }
            "guess_passwd" => {
                row.sym("protocol_type", "tcp").sym("service", "telnet").sym("flag", "RSTO");
                row.set("num_failed_logins", 1.0).set("src_bytes", 126.0).set("dst_bytes", 179.0);
                self.traffic(row, rng, false, 0.0, 0.5, 1.0);
            }
            "ftp_write" | "imap" | "multihop" | "phf" | "spy" => {
                let service = match label {
                    "imap" => "imap4",
                    "phf" => "http",
                    "ftp_write" => "ftp",
                    _ => pick(rng, &["telnet", "ftp_data", "login"]),
                };
                self.login(row, rng, service);
                row.set("hot", rng.random_range(1..10) as f64).set("num_file_creations", rng.random_range(0..3) as f64);
                if label == "imap" {
                    row.sym("flag", pick(rng, &["SF", "SH", "S3"]));
                }
            }
            "buffer_overflow" | "loadmodule" | "perl" | "rootkit" => {
                let service = pick(rng, &["telnet", "ftp_data", "login"]);
                self.login(row, rng, service);
                row.set("duration", rng.random_range(20..8000) as f64)
                    .set("hot", rng.random_range(1..20) as f64)
                    .set("root_shell", if rng.random_bool(0.7) { 1.0 } else { 0.0 })
                    .set("num_file_creations", rng.random_range(0..5) as f64)
                    .set("num_shells", rng.random_range(0..2) as f64)
                    .set("num_root", rng.random_range(0..10) as f64);
            }
            _ => {
                let service = pick(rng, &["http", "http", "http", "smtp", "ftp_data", "domain_u", "private", "other", "ecr_i"]);
                let proto = match service {
                    "domain_u" | "private" => "udp",
                    "ecr_i" => "icmp",
                    _ => "tcp",
                };
                row.sym("protocol_type", proto)
                    .sym("service", service)
                    .sym("flag", if rng.random_bool(0.97) { "SF" } else { "REJ" })
                    .set("logged_in", if proto == "tcp" { 1.0 } else { 0.0 })
                    .set("src_bytes", rng.random_range(0..2000) as f64)
                    .set("dst_bytes", rng.random_range(0..40_000) as f64)
                    .set("duration", if rng.random_bool(0.1) { rng.random_range(1..500) as f64 } else { 0.0 });
                let busy = rng.random_bool(0.05);
                self.traffic(row, rng, busy, 0.0, 0.02, 0.95);
            }
        }
    }

    /// `counts` records per label, in a seeded random order.
    pub fn generate(&self, counts: &[(&str, u64)], seed: u64) -> Vec<ConnectionRecord> {
        let mut labels: Vec<&str> = counts.iter().flat_map(|&(l, n)| std::iter::repeat_n(l, n as usize)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        labels.shuffle(&mut rng);
        labels.into_iter().map(|l| self.record(l, &mut rng)).collect()
    }

    /// Label mix in proportion to the category shares of `counts`, `n`
    /// records in total.
    pub fn generate_n(&self, counts: &[(&str, u64)], n: usize, seed: u64) -> Vec<ConnectionRecord> {
        let total: u64 = counts.iter().map(|c| c.1).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut r = rng.random_range(0..total);
            let label = counts
                .iter()
                .find(|&&(_, c)| {
                    if r < c {
                        true
                    } else {
                        r -= c;
                        false
                    }
                })
                .map(|c| c.0)
                .unwrap_or("normal");
            out.push(self.record(label, &mut rng));
        }
        out
    }

    pub fn category(&self, label: &str) -> Option<Category> {
        self.taxonomy.categorize(label)
    }
}

pub fn write_corpus<W: Write>(mut out: W, records: &[ConnectionRecord], schema: &FeatureSchema) -> io::Result<()> {
    for r in records {
        out.write_all(r.to_kdd_line(schema).as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Streams `count` copies of one fixed record per label, in order, without
/// materialising the corpus.
pub struct TemplateStream {
    templates: Vec<(Vec<u8>, u64)>,
    current: usize,
    emitted: u64,
    offset: usize,
}

impl TemplateStream {
    pub fn new(generator: &Generator, counts: &[(&str, u64)], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let templates = counts
            .iter()
            .map(|&(label, n)| {
                let mut line = generator.record(label, &mut rng).to_kdd_line(generator.schema()).into_bytes();
                line.push(b'\n');
                (line, n)
            })
            .collect();
        Self { templates, current: 0, emitted: 0, offset: 0 }
    }

    /// Total bytes the stream will produce.
    pub fn byte_len(&self) -> u64 {
        self.templates.iter().map(|(l, n)| l.len() as u64 * n).sum()
    }
}

impl Read for TemplateStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let mut written = 0;
        while written < buf.len() {
            let Some((line, n)) = self.templates.get(self.current) else { break };
            if self.emitted == *n {
                self.current += 1;
                self.emitted = 0;
                continue;
            }
            let rest = &line[self.offset..];
            let take = rest.len().min(buf.len() - written);
            buf[written..written + take].copy_from_slice(&rest[..take]);
            written += take;
            self.offset += take;
            if self.offset == line.len() {
                self.offset = 0;
                self.emitted += 1;
            }
        }
        Ok(written)
    }
}
