//! Seeded synthetic corpus: C functions generated from templates that each
//! exhibit exactly one heuristic pattern (or none), with randomized names.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError, FunctionRecord, SourceKind};
use crate::rng::{shuffle, stream, SeededRng};

const TRAIN_STREAM: u64 = 20;
const TEST_STREAM: u64 = 21;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthFunction {
    pub id: String,
    pub project: String,
    pub source: String,
    /// Rule index the template was built to trigger; `None` for benign templates.
    pub injected: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub train: Vec<SynthFunction>,
    pub test: Vec<SynthFunction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_train: 150,
            n_test: 60,
        }
    }
}

const PROJECTS: &[&str] = &["netcore", "imgkit", "webshell"];
const TYPES: &[&str] = &["packet", "session", "frame", "channel", "record", "node", "request", "segment"];
const PTRS: &[&str] = &["pkt", "sess", "desc", "req", "ctx", "dev", "entry", "item", "conn", "obj"];
const FIELDS: &[&str] = &["len", "count", "flags", "state", "size", "offset", "mode", "seq", "refs", "prio"];
const INTS: &[&str] = &["idx", "pos", "slot", "n", "off", "k", "nr", "which"];
const VALS: &[&str] = &["val", "amount", "delta", "code", "ret", "total", "sum"];
const VERBS: &[&str] = &["update", "reset", "apply", "fill", "compute", "parse", "store", "scan", "load", "emit"];
const TABLES: &[&str] = &["table", "slots", "ring", "lut", "bins", "weights", "pool_info"];
const STRS: &[&str] = &["name", "path", "label", "dir", "src", "text"];
const BUFS: &[&str] = &["buf", "out", "mem", "area", "block_buf", "data"];

/// Picks identifiers without repeats inside one function.
struct Names<'r> {
    rng: &'r mut SeededRng,
    used: Vec<&'static str>,
}

impl Names<'_> {
    fn pick(&mut self, pool: &'static [&'static str]) -> &'static str {
        loop {
            let c = pool[self.rng.gen_range(0..pool.len())];
            if !self.used.contains(&c) {
                self.used.push(c);
                return c;
            }
        }
    }

    fn num(&mut self, lo: u32, hi: u32) -> u32 {
        self.rng.gen_range(lo..hi)
    }
}

/// Template families in the order H1..H5, then benign.
const KINDS: usize = 6;

fn render(kind: usize, serial: usize, rng: &mut SeededRng) -> String {
    let variant = rng.gen_range(0..if kind == 5 { 4 } else { 3 });
    let mut n = Names { rng, used: Vec::new() };
    let verb = n.pick(VERBS);
    let ty = n.pick(TYPES);
    let fname = format!("{verb}_{ty}_{serial}");
    match (kind, variant) {
        (0, 0) => {
            let (p, f, v) = (n.pick(PTRS), n.pick(FIELDS), n.pick(VALS));
            let c = n.num(2, 64);
            format!("int {fname}(struct {ty} *{p})\n{{\n\tint {v} = {p}->{f} * {c};\n\treturn {v};\n}}\n")
        }
        (0, 1) => {
            let (sk, tp, ca) = (n.pick(PTRS), n.pick(PTRS), n.pick(PTRS));
            let (f, g, h) = (n.pick(FIELDS), n.pick(FIELDS), n.pick(FIELDS));
            format!(
                "static void {fname}(struct sock *{sk})\n{{\n\tstruct tcp_sock *{tp} = tcp_sk({sk});\n\tstruct {ty} *{ca} = inet_csk_ca({sk});\n\n\t{ca}->{f} = {tp}->{g};\n\t{ca}->{h} = 0;\n}}\n"
            )
        }
        (0, _) => {
            let (p, f, k) = (n.pick(PTRS), n.pick(FIELDS), n.pick(INTS));
            format!("unsigned {fname}(const struct {ty} *{p}, unsigned {k})\n{{\n\treturn {p}->{f} + {k};\n}}\n")
        }
        (1, 0) => {
            let (p, v, f, g) = (n.pick(PTRS), n.pick(VALS), n.pick(FIELDS), n.pick(FIELDS));
            format!("void {fname}(struct {ty} *{p}, int {v})\n{{\n\tif (!{p})\n\t\treturn;\n\t{p}->{f} = {v};\n\t{p}->{g}++;\n}}\n")
        }
        (1, 1) => {
            let (p, s, f, g) = (n.pick(PTRS), n.pick(STRS), n.pick(FIELDS), n.pick(FIELDS));
            format!(
                "void {fname}(struct {ty} *{p}, const char *{s})\n{{\n\tif (!{p} || !{s})\n\t\treturn;\n\tstrcpy({p}->{f}, {s});\n\t{p}->{g} = time(NULL);\n}}\n"
            )
        }
        (1, _) => {
            let (p, k, f) = (n.pick(PTRS), n.pick(INTS), n.pick(FIELDS));
            format!("void {fname}(struct {ty} *{p}, unsigned {k})\n{{\n\tif ({p} == NULL)\n\t\treturn;\n\t{p}->{f} += {k};\n}}\n")
        }
        (2, 0) => {
            let (i, t) = (n.pick(INTS), n.pick(TABLES));
            format!("int {fname}(int {i})\n{{\n\treturn {t}[{i}];\n}}\n")
        }
        (2, 1) => {
            let (i, v, t) = (n.pick(INTS), n.pick(VALS), n.pick(TABLES));
            format!("void {fname}(int {i}, int {v})\n{{\n\t{t}[{i}] = {v};\n}}\n")
        }
        (2, _) => {
            let (i, t) = (n.pick(INTS), n.pick(TABLES));
            format!(
                "static void {fname}(int {i})\n{{\n\tstruct flock fl = {{0}};\n\n\tfl.l_type = F_WRLCK;\n\tif (fcntl({t}[{i}].fd, F_SETLKW, &fl) == -1) {{\n\t\tsyslog(LOG_ERR, \"failed to acquire %d\", {i});\n\t\texit(EXIT_FAILURE);\n\t}}\n}}\n"
            )
        }
        (3, 0) => {
            let (k, b) = (n.pick(INTS), n.pick(BUFS));
            format!("char *{fname}(size_t {k})\n{{\n\tchar *{b} = malloc({k} + 1);\n\tmemset({b}, 0, {k} + 1);\n\treturn {b};\n}}\n")
        }
        (3, 1) => {
            let (d, s, k, b) = (n.pick(STRS), n.pick(STRS), n.pick(INTS), n.pick(BUFS));
            format!(
                "char *{fname}(const char *{d}, const char *{s})\n{{\n\tsize_t {k} = strlen({d}) + strlen({s}) + 2;\n\tchar *{b} = calloc({k}, 1);\n\n\tstrcat({b}, {d});\n\tstrcat({b}, \"/\");\n\tstrcat({b}, {s});\n\treturn {b};\n}}\n"
            )
        }
        (3, _) => {
            let (k, b) = (n.pick(INTS), n.pick(BUFS));
            format!("int *{fname}(int {k})\n{{\n\tint *{b} = (int *)realloc(NULL, {k} * sizeof(int));\n\t{b}[0] = {k};\n\treturn {b};\n}}\n")
        }
        (4, 0) => {
            let (s, v) = (n.pick(STRS), n.pick(VALS));
            format!(
                "int {fname}(const char *{s})\n{{\n\tint {v} = open({s}, O_RDONLY);\n\tif ({v} < 0) {{\n\t\tfprintf(stderr, \"open failed: %s\\n\", {s});\n\t}}\n\treturn {v};\n}}\n"
            )
        }
        (4, 1) => {
            let v = n.pick(VALS);
            let next = n.pick(VERBS);
            format!("void {fname}(int {v})\n{{\n\tif ({v} != 0)\n\t\tperror(\"{verb}\");\n\t{next}_{ty}_done({v});\n}}\n")
        }
        (4, _) => {
            let p = n.pick(PTRS);
            format!("static int {fname}(struct {ty} *{p})\n{{\n\tif (!{p}) {{\n\t\tpr_err(\"missing {ty}\\n\");\n\t}}\n\treturn 0;\n}}\n")
        }
        (_, 0) => {
            let (a, b) = (n.pick(VALS), n.pick(VALS));
            let c = n.num(1, 100);
            format!("int {fname}(int {a}, int {b})\n{{\n\treturn {a} * {b} + {c};\n}}\n")
        }
        (_, 1) => {
            let (p, f) = (n.pick(PTRS), n.pick(FIELDS));
            format!("static int {fname}(const struct {ty} *{p})\n{{\n\tif ({p} == NULL)\n\t\treturn 0;\n\treturn {p}->{f};\n}}\n")
        }
        (_, 2) => {
            let (t, k, s, i) = (n.pick(TABLES), n.pick(INTS), n.pick(VALS), n.pick(INTS));
            format!(
                "int {fname}(const int *{t}, int {k})\n{{\n\tint {s} = 0;\n\n\tfor (int {i} = 0; {i} < {k}; {i}++)\n\t\t{s} += {t}[{i}];\n\treturn {s};\n}}\n"
            )
        }
        (_, _) => {
            let (k, b) = (n.pick(INTS), n.pick(BUFS));
            format!(
                "int {fname}(size_t {k})\n{{\n\tchar *{b} = malloc({k});\n\n\tif (!{b})\n\t\treturn -1;\n\tmemset({b}, 0, {k});\n\tfree({b});\n\treturn 0;\n}}\n"
            )
        }
    }
}

fn split(seed: u64, stage: u64, n: usize, prefix: &str, serial0: usize) -> Vec<SynthFunction> {
    let mut rng = stream(seed, stage);
    let mut kinds: Vec<usize> = (0..n).map(|i| i % KINDS).collect();
    shuffle(&mut rng, &mut kinds);
    kinds
        .into_iter()
        .enumerate()
        .map(|(i, kind)| {
            let project = PROJECTS[rng.gen_range(0..PROJECTS.len())];
            SynthFunction {
                id: format!("{prefix}-{i:04}"),
                project: project.into(),
                source: render(kind, serial0 + i, &mut rng),
                injected: (kind < 5).then_some(kind + 1),
            }
        })
        .collect()
}

/// Balanced train/test splits: template families cycle, then get shuffled.
pub fn generate(cfg: SynthConfig) -> SynthCorpus {
    SynthCorpus {
        train: split(cfg.seed, TRAIN_STREAM, cfg.n_train, "train", 0),
        test: split(cfg.seed, TEST_STREAM, cfg.n_test, "test", cfg.n_train),
    }
}

pub fn to_corpus(name: &str, funcs: &[SynthFunction]) -> Result<Corpus, CorpusError> {
    let records = funcs
        .iter()
        .map(|f| FunctionRecord::new(f.id.clone(), f.project.clone(), None, f.source.clone()))
        .collect();
    Corpus::new(name, SourceKind::CsvDataset, records, 0)
}
