//! Domain primitives: examples over the hypercube, per-task datasets,
//! and the JSON-lines dataset file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{self, Purpose, SeedSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing header")]
    MissingHeader,
    #[error("{0}")]
    Invalid(String),
}

impl DataError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Problem shape: d features, sparsity budget k, n tasks, m samples per task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub m: usize,
}

impl ProblemDims {
    pub fn new(d: usize, k: usize, n: usize, m: usize) -> Result<Self, DataError> {
        if d == 0 || k == 0 || n == 0 || m == 0 {
            return Err(DataError::Invalid(format!(
                "dims must all be >= 1, got d={d} k={k} n={n} m={m}"
            )));
        }
        if k > d {
            return Err(DataError::Invalid(format!("k={k} exceeds d={d}")));
        }
        Ok(ProblemDims { d, k, n, m })
    }
}

/// A labeled point of the hypercube: x in {-1,+1}^d, y in {-1,+1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypercubeExample {
    pub x: Vec<i8>,
    pub y: i8,
}

impl HypercubeExample {
    pub fn new(x: Vec<i8>, y: i8) -> Result<Self, DataError> {
        if let Some(pos) = x.iter().position(|&v| v != 1 && v != -1) {
            return Err(DataError::Invalid(format!(
                "coordinate {pos} is {} (must be +1 or -1)",
                x[pos]
            )));
        }
        if y != 1 && y != -1 {
            return Err(DataError::Invalid(format!("label is {y} (must be +1 or -1)")));
        }
        Ok(HypercubeExample { x, y })
    }
}

/// The m examples of one task. Task ids run 1..=n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub task_id: usize,
    pub examples: Vec<HypercubeExample>,
}

/// All n task datasets plus the declared problem dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultitaskDataset {
    pub dims: ProblemDims,
    pub tasks: Vec<TaskDataset>,
}

impl MultitaskDataset {
    pub fn new(dims: ProblemDims, tasks: Vec<TaskDataset>) -> Result<Self, DataError> {
        if tasks.len() != dims.n {
            return Err(DataError::Invalid(format!(
                "expected {} tasks, got {}",
                dims.n,
                tasks.len()
            )));
        }
        for (i, task) in tasks.iter().enumerate() {
            if task.task_id != i + 1 {
                return Err(DataError::Invalid(format!(
                    "task ids must be 1..=n in order; position {} has id {}",
                    i, task.task_id
                )));
            }
            if task.examples.len() != dims.m {
                return Err(DataError::Invalid(format!(
                    "task {} has {} examples, declared m={}",
                    task.task_id,
                    task.examples.len(),
                    dims.m
                )));
            }
            for (j, ex) in task.examples.iter().enumerate() {
                if ex.x.len() != dims.d {
                    return Err(DataError::Invalid(format!(
                        "task {} example {} has dimension {}, declared d={}",
                        task.task_id,
                        j,
                        ex.x.len(),
                        dims.d
                    )));
                }
            }
        }
        Ok(MultitaskDataset { dims, tasks })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    d: usize,
    k_hint: usize,
    n: usize,
    m: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataLine {
    task: usize,
    x: Vec<i8>,
    y: i8,
}

/// Write a dataset as JSON lines: one header object, then one object per example.
pub fn write_dataset(path: &Path, ds: &MultitaskDataset) -> Result<(), DataError> {
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = HeaderLine {
        d: ds.dims.d,
        k_hint: ds.dims.k,
        n: ds.dims.n,
        m: ds.dims.m,
    };
    let mut write_line = |v: &str| -> Result<(), DataError> {
        out.write_all(v.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| DataError::io(path, e))
    };
    write_line(&serde_json::to_string(&header).expect("header serializes"))?;
    for task in &ds.tasks {
        for ex in &task.examples {
            let line = DataLine {
                task: task.task_id,
                x: ex.x.clone(),
                y: ex.y,
            };
            write_line(&serde_json::to_string(&line).expect("data line serializes"))?;
        }
    }
    Ok(())
}

/// Read and validate a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<MultitaskDataset, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let header: HeaderLine = match lines.next() {
        None => return Err(DataError::MissingHeader),
        Some((_, line)) => {
            let line = line.map_err(|e| DataError::io(path, e))?;
            if line.trim().is_empty() {
                return Err(DataError::MissingHeader);
            }
            serde_json::from_str(&line).map_err(|e| DataError::Parse {
                line: 1,
                msg: format!("bad header: {e}"),
            })?
        }
    };
    let dims = ProblemDims::new(header.d, header.k_hint, header.n, header.m)?;

    let mut tasks: Vec<TaskDataset> = (1..=dims.n)
        .map(|task_id| TaskDataset {
            task_id,
            examples: Vec::with_capacity(dims.m),
        })
        .collect();

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| DataError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: DataLine = serde_json::from_str(&line).map_err(|e| DataError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if row.task == 0 || row.task > dims.n {
            return Err(DataError::Parse {
                line: lineno,
                msg: format!("task {} out of range 1..={}", row.task, dims.n),
            });
        }
        if row.x.len() != dims.d {
            return Err(DataError::Parse {
                line: lineno,
                msg: format!("x has {} coordinates, header declares d={}", row.x.len(), dims.d),
            });
        }
        let ex = HypercubeExample::new(row.x, row.y).map_err(|e| DataError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        tasks[row.task - 1].examples.push(ex);
    }

    for task in &tasks {
        if task.examples.len() != dims.m {
            return Err(DataError::Invalid(format!(
                "task {} has {} examples, declared m={}",
                task.task_id,
                task.examples.len(),
                dims.m
            )));
        }
    }
    MultitaskDataset::new(dims, tasks)
}

/// Deterministic per-task train/test split. Train receives
/// ceil((1 - fraction) * m) examples of each task; both sides are non-empty.
pub fn split_holdout(
    ds: &MultitaskDataset,
    fraction: f64,
    seed: SeedSpec,
) -> Result<(MultitaskDataset, MultitaskDataset), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::Invalid(format!(
            "fraction must lie in (0,1), got {fraction}"
        )));
    }
    let m = ds.dims.m;
    if m < 2 {
        return Err(DataError::Invalid(
            "split requires at least 2 examples per task".to_string(),
        ));
    }
    let m_train = ((1.0 - fraction) * m as f64).ceil() as usize;
    if m_train == 0 || m_train >= m {
        return Err(DataError::Invalid(format!(
            "fraction {fraction} leaves an empty side for m={m} (train would get {m_train})"
        )));
    }
    let m_test = m - m_train;

    let mut train_tasks = Vec::with_capacity(ds.dims.n);
    let mut test_tasks = Vec::with_capacity(ds.dims.n);
    for task in &ds.tasks {
        let mut order: Vec<usize> = (0..m).collect();
        let mut rng = seed.stream(task.task_id, Purpose::Split);
        seed::shuffle(&mut rng, &mut order);
        let mut train_idx: Vec<usize> = order[..m_train].to_vec();
        let mut test_idx: Vec<usize> = order[m_train..].to_vec();
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        train_tasks.push(TaskDataset {
            task_id: task.task_id,
            examples: train_idx.iter().map(|&j| task.examples[j].clone()).collect(),
        });
        test_tasks.push(TaskDataset {
            task_id: task.task_id,
            examples: test_idx.iter().map(|&j| task.examples[j].clone()).collect(),
        });
    }
    let train = MultitaskDataset::new(
        ProblemDims::new(ds.dims.d, ds.dims.k, ds.dims.n, m_train)?,
        train_tasks,
    )?;
    let test = MultitaskDataset::new(
        ProblemDims::new(ds.dims.d, ds.dims.k, ds.dims.n, m_test)?,
        test_tasks,
    )?;
    Ok((train, test))
}
