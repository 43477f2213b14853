//! Micro-benchmarks of masking overhead against an unmasked scan.
//!
//! Rows are generated from a seeded PRNG and stored in a compact binary encoding,
//! so every pass pays a realistic decode ("scan") cost. The baseline decodes each
//! row and passes it through unchanged; the masked run decodes and applies a
//! compiled plan. Both consume the output the same way. Times are per-thread CPU
//! time, per row, over interleaved repetitions.

use std::fmt::Write as _;
use std::hint::black_box;
use std::str::FromStr;

use chrono::Utc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::compiler::compile_view;
use crate::condition::AttrClass;
use crate::consent::{build_snapshots, ConsentRecord, ConsentResolver};
use crate::evaluator::{BoundPlan, CompiledPlan};
use crate::planner::{build_schema_tree, prune_policies};
use crate::policy::{Action, AttributeRegistry, Policy};
use crate::schema::{FieldPath, RelationSchema, SchemaType};
use crate::value::{Row, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Size of the masked string field.
    FieldSize,
    /// Depth of the masked field inside nested structs.
    Depth,
    /// Number of policies masking distinct fields.
    Policies,
    /// Fraction of subjects who consented.
    ConsentRate,
    /// Array length, masking a field of every element with and without a filter.
    Array,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::FieldSize,
        Experiment::Depth,
        Experiment::Policies,
        Experiment::ConsentRate,
        Experiment::Array,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FieldSize => "field-size",
            Experiment::Depth => "depth",
            Experiment::Policies => "policies",
            Experiment::ConsentRate => "consent-rate",
            Experiment::Array => "array",
        }
    }

    /// Default x values.
    pub fn default_points(self) -> Vec<f64> {
        match self {
            Experiment::FieldSize => vec![16.0, 64.0, 256.0, 1024.0, 4096.0],
            Experiment::Depth => (1..=8).map(f64::from).collect(),
            Experiment::Policies => (1..=10).map(f64::from).collect(),
            Experiment::ConsentRate => vec![0.0, 0.25, 0.5, 0.75, 1.0],
            Experiment::Array => vec![2.0, 4.0, 8.0, 16.0, 32.0],
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub rows: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Unmasked string columns in every row.
    pub payload_fields: usize,
    pub payload_len: usize,
    /// Consent rate for experiments that do not vary it.
    pub consent_rate: f64,
    /// Overrides the experiment's default x values.
    pub points: Option<Vec<f64>>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            rows: 100_000,
            repetitions: 5,
            seed: 42,
            payload_fields: 24,
            payload_len: 24,
            consent_rate: 0.0,
            points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchPoint {
    pub x: f64,
    /// Per-repetition ns per row.
    pub baseline_ns: Vec<f64>,
    pub masked_ns: Vec<f64>,
    pub mean_baseline_ns: f64,
    pub mean_masked_ns: f64,
    /// Median over repetitions of `(masked - baseline) / baseline`.
    pub overhead: f64,
    /// Fraction of output rows in which some mask fired.
    pub masked_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<BenchPoint>,
    pub fit: LinearFit,
}

impl Series {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn overheads(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.overhead).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub experiment: Experiment,
    pub config: BenchConfig,
    pub series: Vec<Series>,
}

impl BenchReport {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Plain-text table, one line per point.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} (rows={}, reps={}, seed={})",
            self.experiment.name(),
            self.config.rows,
            self.config.repetitions,
            self.config.seed
        );
        let _ = writeln!(out, "{:<14} {:>10} {:>12} {:>12} {:>10}", "series", "x", "base ns", "masked ns", "overhead");
        for s in &self.series {
            for p in &s.points {
                let _ = writeln!(
                    out,
                    "{:<14} {:>10} {:>12.1} {:>12.1} {:>9.2}%",
                    s.name,
                    p.x,
                    p.mean_baseline_ns,
                    p.mean_masked_ns,
                    p.overhead * 100.0
                );
            }
            let _ = writeln!(out, "{:<14} slope={:.5} r2={:.3}", s.name, s.fit.slope, s.fit.r2);
        }
        out
    }
}

/// Least-squares line through the points.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return LinearFit {
            slope: 0.0,
            intercept: ys.first().copied().unwrap_or(0.0),
            r2: 1.0,
        };
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    LinearFit { slope, intercept, r2 }
}

pub fn strictly_increasing(ys: &[f64]) -> bool {
    ys.windows(2).all(|w| w[1] > w[0])
}

pub fn non_increasing(ys: &[f64]) -> bool {
    ys.windows(2).all(|w| w[1] <= w[0])
}

/// CPU time consumed by the calling thread, in nanoseconds.
pub fn thread_cpu_ns() -> u64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "thread CPU clock unavailable");
    ts.tv_sec as u64 * 1_000_000_000 + ts.tv_nsec as u64
}

// Binary row codec: a presence byte per value, little-endian scalars,
// length-prefixed strings and collections.

fn encode(v: &Value, ty: &SchemaType, buf: &mut Vec<u8>) {
    if v.is_null() {
        buf.push(0);
        return;
    }
    buf.push(1);
    match (v, ty) {
        (Value::Bool(b), _) => buf.push(*b as u8),
        (Value::Int(i), _) | (Value::Timestamp(i), _) => buf.extend_from_slice(&i.to_le_bytes()),
        (Value::Double(x), _) => buf.extend_from_slice(&x.to_le_bytes()),
        (Value::Str(s), _) => {
            buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
            buf.extend_from_slice(s.as_bytes());
        }
        (Value::Struct(vals), SchemaType::Struct { fields }) => {
            for (v, f) in vals.iter().zip(fields) {
                encode(v, &f.data_type, buf);
            }
        }
        (Value::Array(items), SchemaType::Array { element }) => {
            buf.extend_from_slice(&(items.len() as u32).to_le_bytes());
            for it in items.iter() {
                encode(it, element, buf);
            }
        }
        (Value::Map(pairs), SchemaType::Map { key, value }) => {
            buf.extend_from_slice(&(pairs.len() as u32).to_le_bytes());
            for (k, v) in pairs.iter() {
                encode(k, key, buf);
                encode(v, value, buf);
            }
        }
        _ => panic!("value does not match its type"),
    }
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> &'a [u8] {
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    head
}

fn take_u32(buf: &mut &[u8]) -> usize {
    u32::from_le_bytes(take(buf, 4).try_into().unwrap()) as usize
}

fn decode(buf: &mut &[u8], ty: &SchemaType) -> Value {
    if take(buf, 1)[0] == 0 {
        return Value::Null;
    }
    match ty {
        SchemaType::Atomic { name } => {
            use crate::schema::AtomicType as A;
            match name {
                A::Boolean => Value::Bool(take(buf, 1)[0] != 0),
                A::Bigint | A::Integer => Value::Int(i64::from_le_bytes(take(buf, 8).try_into().unwrap())),
                A::Timestamp => Value::Timestamp(i64::from_le_bytes(take(buf, 8).try_into().unwrap())),
                A::Double => Value::Double(f64::from_le_bytes(take(buf, 8).try_into().unwrap())),
                A::Varchar => {
                    let n = take_u32(buf);
                    Value::str(std::str::from_utf8(take(buf, n)).expect("encoded utf-8"))
                }
            }
        }
        SchemaType::Struct { fields } => Value::structure(fields.iter().map(|f| decode(buf, &f.data_type)).collect()),
        SchemaType::Array { element } => {
            let n = take_u32(buf);
            Value::array((0..n).map(|_| decode(buf, element)).collect())
        }
        SchemaType::Map { key, value } => {
            let n = take_u32(buf);
            Value::map((0..n).map(|_| (decode(buf, key), decode(buf, value))).collect())
        }
    }
}

/// Rows per timing block.
const BLOCK_ROWS: usize = 1024;

/// Rows of one schema, encoded back to back.
pub struct EncodedRelation {
    schema: RelationSchema,
    rows: usize,
    bytes: Vec<u8>,
    /// Byte offset of every `BLOCK_ROWS`-th row.
    block_starts: Vec<usize>,
}

impl EncodedRelation {
    pub fn encode(schema: &RelationSchema, rows: impl IntoIterator<Item = Row>) -> Self {
        let row_type = schema.row_type();
        let mut bytes = Vec::new();
        let mut block_starts = Vec::new();
        let mut n = 0;
        for r in rows {
            if n % BLOCK_ROWS == 0 {
                block_starts.push(bytes.len());
            }
            encode(&Value::structure(r), &row_type, &mut bytes);
            n += 1;
        }
        EncodedRelation {
            schema: schema.clone(),
            rows: n,
            bytes,
            block_starts,
        }
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn byte_len(&self) -> usize {
        self.bytes.len()
    }

    /// Decodes every row in order.
    pub fn scan(&self, mut f: impl FnMut(Row)) {
        let row_type = self.schema.row_type();
        for b in 0..self.block_starts.len() {
            self.scan_block(b, &row_type, &mut f);
        }
    }

    fn block_count(&self) -> usize {
        self.block_starts.len()
    }

    fn scan_block(&self, block: usize, row_type: &SchemaType, mut f: impl FnMut(Row)) {
        let mut buf = &self.bytes[self.block_starts[block]..];
        let n = BLOCK_ROWS.min(self.rows - block * BLOCK_ROWS);
        for _ in 0..n {
            match decode(&mut buf, row_type) {
                Value::Struct(vals) => f(std::sync::Arc::unwrap_or_clone(vals)),
                _ => unreachable!("rows are never NULL"),
            }
        }
    }
}

fn consume(row: &Row) -> usize {
    row.iter().filter(|v| !v.is_null()).count()
}

/// Seeded row generator for the benchmark schemas.
struct Generator {
    rng: ChaCha8Rng,
}

impl Generator {
    fn text(&mut self, len: usize) -> Value {
        let s: String = (0..len).map(|_| self.rng.gen_range(b'a'..=b'z') as char).collect();
        Value::str(&s)
    }

    fn value(&mut self, ty: &SchemaType, len: usize, array_len: usize) -> Value {
        use crate::schema::AtomicType as A;
        match ty {
            SchemaType::Atomic { name: A::Varchar } => self.text(len),
            SchemaType::Atomic { name: A::Boolean } => Value::Bool(true),
            SchemaType::Atomic { name: A::Double } => Value::Double(self.rng.gen()),
            SchemaType::Atomic { .. } => Value::Int(self.rng.gen_range(0..1_000_000)),
            SchemaType::Struct { fields } => {
                Value::structure(fields.iter().map(|f| self.value(&f.data_type, len, array_len)).collect())
            }
            SchemaType::Array { element } => {
                Value::array((0..array_len).map(|_| self.value(element, len, array_len)).collect())
            }
            SchemaType::Map { key, value } => Value::map(
                (0..array_len)
                    .map(|_| (self.value(key, len, array_len), self.value(value, len, array_len)))
                    .collect(),
            ),
        }
    }
}

/// One benchmark setup: a schema, the paths to mask and how rows are shaped.
struct Setup {
    schema: RelationSchema,
    paths: Vec<String>,
    /// String length used for the masked column(s).
    target_len: usize,
    array_len: usize,
    consent_rate: f64,
}

/// Levels every depth point is padded to.
const DEPTH_PAD: usize = 8;

fn nested_type(depth: usize) -> SchemaType {
    let mut ty = SchemaType::struct_of([("a", SchemaType::bigint()), ("leaf", SchemaType::varchar())]);
    for _ in 1..depth {
        ty = SchemaType::struct_of([("a", SchemaType::bigint()), ("child", ty)]);
    }
    ty
}

fn nested_path(depth: usize) -> String {
    let mut p = String::from("$.target");
    for _ in 1..depth {
        p.push_str(".child");
    }
    p.push_str(".leaf");
    p
}

fn element_type() -> SchemaType {
    SchemaType::struct_of([
        ("flag", SchemaType::boolean()),
        ("x", SchemaType::bigint()),
        ("y", SchemaType::bigint()),
    ])
}

fn schema_with(cfg: &BenchConfig, extra: Vec<(String, SchemaType)>) -> RelationSchema {
    let mut cols: Vec<(String, SchemaType)> = vec![("id".into(), SchemaType::bigint())];
    cols.extend((0..cfg.payload_fields).map(|i| (format!("p{i}"), SchemaType::varchar())));
    cols.extend(extra);
    RelationSchema::new("bench", cols, Some("id")).expect("bench schema is valid")
}

fn setups(exp: Experiment, cfg: &BenchConfig, x: f64) -> Vec<(String, Setup)> {
    let one = |name: &str, schema, paths: Vec<String>, target_len, array_len, consent_rate| {
        (
            name.to_string(),
            Setup {
                schema,
                paths,
                target_len,
                array_len,
                consent_rate,
            },
        )
    };
    match exp {
        Experiment::FieldSize => vec![one(
            "masking",
            schema_with(cfg, vec![("target".into(), SchemaType::varchar())]),
            vec!["$.target".into()],
            x as usize,
            0,
            cfg.consent_rate,
        )],
        Experiment::Depth => {
            let d = (x as usize).max(1);
            // Pad with one-level structs so every point holds the same number of
            // nested levels; only the depth of the masked path varies.
            let mut cols = vec![("target".to_string(), nested_type(d))];
            cols.extend(
                (d..DEPTH_PAD).map(|i| (format!("pad{i}"), SchemaType::struct_of([("a", SchemaType::bigint())]))),
            );
            vec![one(
                "masking",
                schema_with(cfg, cols),
                vec![nested_path(d)],
                cfg.payload_len,
                0,
                cfg.consent_rate,
            )]
        }
        Experiment::Policies => {
            let n = (x as usize).max(1);
            let cols = (0..10)
                .map(|i| {
                    (
                        format!("m{i}"),
                        SchemaType::struct_of([("x", SchemaType::varchar()), ("y", SchemaType::bigint())]),
                    )
                })
                .collect();
            vec![one(
                "masking",
                schema_with(cfg, cols),
                (0..n).map(|i| format!("$.m{i}.x")).collect(),
                cfg.payload_len,
                0,
                cfg.consent_rate,
            )]
        }
        Experiment::ConsentRate => vec![one(
            "masking",
            schema_with(cfg, vec![("target".into(), SchemaType::array_of(element_type()))]),
            vec!["$.target.[item].x".into()],
            cfg.payload_len,
            8,
            x,
        )],
        Experiment::Array => {
            let schema = schema_with(cfg, vec![("target".into(), SchemaType::array_of(element_type()))]);
            let n = x as usize;
            vec![
                one(
                    "unconditional",
                    schema.clone(),
                    vec!["$.target.[item].x".into()],
                    cfg.payload_len,
                    n,
                    cfg.consent_rate,
                ),
                one(
                    "conditional",
                    schema,
                    vec!["$.target.[item].[?(@.flag = true)].x".into()],
                    cfg.payload_len,
                    n,
                    cfg.consent_rate,
                ),
            ]
        }
    }
}

struct Prepared {
    data: EncodedRelation,
    plan: CompiledPlan,
    resolver: ConsentResolver,
}

fn prepare(setup: &Setup, cfg: &BenchConfig, rng: &mut ChaCha8Rng) -> Prepared {
    let registry = AttributeRegistry::from_pairs([("c", AttrClass::Consent)]).expect("registry");
    let pairs: Vec<(FieldPath, Policy)> = setup
        .paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let policy = Policy::new(format!("p{i}"), "bench", format!("l{i}"), "c", Action::Keep, &registry)
                .expect("bench policy");
            (FieldPath::parse(p).expect("bench path"), policy)
        })
        .collect();
    let pruned = prune_policies(&build_schema_tree(&pairs)).pairs();
    let view = compile_view(&setup.schema, &pruned, "bench").expect("bench view compiles");
    let plan = CompiledPlan::new(&view).expect("bench plan");

    let mut gen = Generator {
        rng: ChaCha8Rng::seed_from_u64(rng.gen()),
    };
    let schema = &setup.schema;
    let rows = (0..cfg.rows).map(|i| {
        let mut row = Vec::with_capacity(schema.columns.len());
        for col in &schema.columns {
            let v = match col.name.as_str() {
                "id" => Value::Int(i as i64),
                "target" => gen.value(&col.data_type, setup.target_len, setup.array_len),
                _ => gen.value(&col.data_type, cfg.payload_len, setup.array_len),
            };
            row.push(v);
        }
        row
    });
    let data = EncodedRelation::encode(schema, rows.collect::<Vec<_>>());

    let records: Vec<ConsentRecord> = (0..cfg.rows as i64)
        .map(|s| ConsentRecord::new(s, "c", rng.gen_bool(setup.consent_rate.clamp(0.0, 1.0))))
        .collect();
    let snaps = build_snapshots(&records, Utc::now()).expect("bench consents");
    Prepared {
        data,
        plan,
        resolver: ConsentResolver::from_snapshots(snaps),
    }
}

fn baseline_block(p: &Prepared, block: usize, row_type: &SchemaType) -> u64 {
    let mut acc = 0usize;
    let start = thread_cpu_ns();
    p.data.scan_block(block, row_type, |row| acc += consume(&black_box(row)));
    let ns = thread_cpu_ns() - start;
    black_box(acc);
    ns
}

fn masked_block(p: &Prepared, plan: &BoundPlan, block: usize, row_type: &SchemaType, masked_rows: &mut usize) -> u64 {
    let mut acc = 0usize;
    let start = thread_cpu_ns();
    p.data.scan_block(block, row_type, |row| {
        let mut fired = false;
        if let Some(out) = plan.apply_owned(row, |_| fired = true).expect("bench plan runs") {
            acc += consume(&out);
        }
        *masked_rows += fired as usize;
    });
    let ns = thread_cpu_ns() - start;
    black_box(acc);
    ns
}

/// One repetition: baseline and masked passes alternate block by block, each
/// going first on every other block, so drift and cache warmth hit both alike.
/// Returns ns per row for both and the number of rows a mask fired on.
fn time_pair(p: &Prepared, rep: usize) -> (f64, f64, usize) {
    let row_type = p.data.schema.row_type();
    let plan = p.plan.bind(&p.resolver).expect("bench consents are bound");
    let (mut base, mut masked, mut fired) = (0u64, 0u64, 0usize);
    for b in 0..p.data.block_count() {
        if (b + rep) % 2 == 0 {
            base += baseline_block(p, b, &row_type);
            masked += masked_block(p, &plan, b, &row_type, &mut fired);
        } else {
            masked += masked_block(p, &plan, b, &row_type, &mut fired);
            base += baseline_block(p, b, &row_type);
        }
    }
    let n = p.data.len().max(1) as f64;
    (base as f64 / n, masked as f64 / n, fired)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// Runs one experiment. Every repetition visits all points in turn; see
/// `time_pair` for how a single measurement is taken.
pub fn run_experiment(exp: Experiment, cfg: &BenchConfig) -> BenchReport {
    let xs = cfg.points.clone().unwrap_or_else(|| exp.default_points());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // prepared[x][series]
    let mut names: Vec<String> = Vec::new();
    let mut prepared: Vec<Vec<Prepared>> = Vec::new();
    for &x in &xs {
        let mut row = Vec::new();
        for (name, setup) in setups(exp, cfg, x) {
            if !names.contains(&name) {
                names.push(name);
            }
            row.push(prepare(&setup, cfg, &mut rng));
        }
        prepared.push(row);
    }
    let reps = cfg.repetitions.max(1);
    let mut base = vec![vec![Vec::new(); names.len()]; xs.len()];
    let mut masked = vec![vec![Vec::new(); names.len()]; xs.len()];
    let mut fired = vec![vec![0usize; names.len()]; xs.len()];
    // Warm-up pass so the first measured repetition is not penalized.
    for p in prepared.iter().flatten() {
        time_pair(p, 0);
    }
    for rep in 0..reps {
        for (xi, row) in prepared.iter().enumerate() {
            for (si, p) in row.iter().enumerate() {
                let (b, m, f) = time_pair(p, rep);
                base[xi][si].push(b);
                masked[xi][si].push(m);
                fired[xi][si] = f;
            }
        }
    }
    let series = names
        .iter()
        .enumerate()
        .map(|(si, name)| {
            let points: Vec<BenchPoint> = xs
                .iter()
                .enumerate()
                .map(|(xi, &x)| {
                    let mb = mean(&base[xi][si]);
                    let mm = mean(&masked[xi][si]);
                    BenchPoint {
                        x,
                        baseline_ns: base[xi][si].clone(),
                        masked_ns: masked[xi][si].clone(),
                        mean_baseline_ns: mb,
                        mean_masked_ns: mm,
                        // Paired per repetition, so drift between points cancels.
                        overhead: median(
                            base[xi][si].iter().zip(&masked[xi][si]).map(|(b, m)| (m - b) / b).collect(),
                        ),
                        masked_fraction: fired[xi][si] as f64 / cfg.rows.max(1) as f64,
                    }
                })
                .collect();
            let fit = linear_fit(&xs, &points.iter().map(|p| p.overhead).collect::<Vec<_>>());
            Series {
                name: name.clone(),
                points,
                fit,
            }
        })
        .collect();
    BenchReport {
        experiment: exp,
        config: cfg.clone(),
        series,
    }
}
