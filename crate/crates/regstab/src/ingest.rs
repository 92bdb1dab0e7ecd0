//! CSV loading, environment splitting and the real-data workflow.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use regstab_core::permtest::PermutationTestResult;
use regstab_core::pipeline::{environment_test, rs_test, Nuisance, RsOptions};
use regstab_core::regression::{ols_inference_table, InferenceRow};
use regstab_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

fn default_min_env_size() -> usize {
    70
}

/// Column roles. An empty `background` means every column not named
/// elsewhere (and not the environment column), in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSchema {
    pub target: String,
    pub causes: Vec<String>,
    #[serde(default)]
    pub environment: Option<String>,
    #[serde(default)]
    pub background: Vec<String>,
    #[serde(default)]
    pub drop: Vec<String>,
    /// Groups with fewer rows are discarded.
    #[serde(default = "default_min_env_size")]
    pub min_env_size: usize,
}

impl ColumnSchema {
    /// `y` is the target, columns starting with `x` are causes, the rest is background.
    pub fn default_for(headers: &[String]) -> Result<Self> {
        let causes: Vec<String> = headers.iter().filter(|h| h.starts_with('x')).cloned().collect();
        Self { target: "y".into(), causes, environment: None, background: Vec::new(), drop: Vec::new(), min_env_size: 1 }
            .checked()
    }

    /// College Distance layout (base-year test score, environments from
    /// the state manufacturing wage `stwmfg80`).
    pub fn college_distance(causes: &[&str]) -> Self {
        Self {
            target: "bytest".into(),
            causes: causes.iter().map(|c| c.to_string()).collect(),
            environment: Some("stwmfg80".into()),
            background: Vec::new(),
            drop: vec!["ed".into(), "tuition".into()],
            min_env_size: 70,
        }
    }

    fn checked(self) -> Result<Self> {
        if self.causes.is_empty() {
            return Err(AppError::Schema("no causes".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let roles = std::iter::once(&self.target)
            .chain(&self.causes)
            .chain(&self.environment)
            .chain(&self.background)
            .chain(&self.drop);
        for name in roles {
            if !seen.insert(name.as_str()) {
                return Err(AppError::Schema(format!("column `{name}` has more than one role")));
            }
        }
        Ok(self)
    }

    /// Background column names resolved against a header.
    pub fn resolve_background(&self, headers: &[String]) -> Vec<String> {
        if !self.background.is_empty() {
            return self.background.clone();
        }
        headers
            .iter()
            .filter(|h| {
                **h != self.target
                    && !self.causes.contains(h)
                    && self.environment.as_ref() != Some(*h)
                    && !self.drop.contains(h)
            })
            .cloned()
            .collect()
    }
}

/// Raw CSV contents as strings; cells are parsed on demand so that unused
/// columns may hold anything.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(AppError::csv(path))?;
        let headers = rdr.headers().map_err(AppError::csv(path))?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()
            .map_err(AppError::csv(path))?;
        Ok(Self { headers, rows })
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> std::result::Result<Self, csv::Error> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr.records().map(|r| r.map(|r| r.iter().map(str::to_string).collect())).collect::<std::result::Result<_, _>>()?;
        Ok(Self { headers, rows })
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| AppError::MissingColumn(name.to_string()))
    }

    fn raw(&self, name: &str) -> Result<Vec<&str>> {
        let j = self.index(name)?;
        Ok(self.rows.iter().map(|r| r.get(j).map_or("", String::as_str)).collect())
    }

    /// Parses a column; errors name the column and the 1-based data row.
    pub fn numeric(&self, name: &str, rows: &[usize]) -> Result<Vec<f64>> {
        let j = self.index(name)?;
        rows.iter()
            .map(|&i| {
                let cell = self.rows[i].get(j).map_or("", String::as_str);
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| AppError::NonNumeric {
                    row: i + 1,
                    column: name.to_string(),
                    value: cell.to_string(),
                })
            })
            .collect()
    }

    fn matrix(&self, names: &[String], rows: &[usize]) -> Result<DMatrix<f64>> {
        let cols = names.iter().map(|n| self.numeric(n, rows)).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(rows.len(), names.len(), |i, j| cols[j][i]))
    }
}

/// Retained environment groups over one pooled dataset. Row order inside
/// each group follows the file.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentCollection {
    pub schema: ColumnSchema,
    /// Rows of all retained groups, group by group.
    pub pooled: Dataset,
    pub labels: Vec<String>,
    /// Row indices into `pooled` per group.
    pub groups: Vec<Vec<usize>>,
}

impl EnvironmentCollection {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn total_rows(&self) -> usize {
        self.pooled.rows()
    }

    /// `(label, dataset)` per environment.
    pub fn members(&self) -> Result<Vec<(String, Dataset)>> {
        self.labels
            .iter()
            .zip(&self.groups)
            .map(|(l, rows)| Ok((l.clone(), self.pooled.select_rows(rows)?)))
            .collect()
    }
}

fn dataset(table: &Table, schema: &ColumnSchema, background: &[String], rows: &[usize]) -> Result<Dataset> {
    let y = DVector::from_vec(table.numeric(&schema.target, rows)?);
    let x = table.matrix(&schema.causes, rows)?;
    let w = table.matrix(background, rows)?;
    Ok(Dataset::with_names(y, x, w, schema.causes.clone(), background.to_vec())?)
}

pub fn collection_from_table(table: &Table, schema: &ColumnSchema) -> Result<EnvironmentCollection> {
    let schema = schema.clone().checked()?;
    for name in std::iter::once(&schema.target).chain(&schema.causes).chain(&schema.environment) {
        table.index(name)?;
    }
    let background = schema.resolve_background(&table.headers);
    let (labels, groups): (Vec<String>, Vec<Vec<usize>>) = match &schema.environment {
        None => (vec!["all".into()], vec![(0..table.rows()).collect()]),
        Some(env) => {
            let mut order: Vec<String> = Vec::new();
            let mut by_label: HashMap<&str, Vec<usize>> = HashMap::new();
            for (i, v) in table.raw(env)?.into_iter().enumerate() {
                by_label
                    .entry(v)
                    .or_insert_with(|| {
                        order.push(v.to_string());
                        Vec::new()
                    })
                    .push(i);
            }
            order.into_iter().map(|l| { let rows = by_label.remove(l.as_str()).unwrap_or_default(); (l, rows) }).unzip()
        }
    };
    let (labels, groups): (Vec<String>, Vec<Vec<usize>>) =
        labels.into_iter().zip(groups).filter(|(_, g)| g.len() >= schema.min_env_size && !g.is_empty()).unzip();
    if groups.is_empty() {
        return Err(AppError::Empty(format!("no group has at least {} rows", schema.min_env_size)));
    }
    let file_rows: Vec<usize> = groups.iter().flatten().copied().collect();
    let pooled = dataset(table, &schema, &background, &file_rows)?;
    let mut next = 0;
    let groups = groups
        .iter()
        .map(|g| {
            let idx = (next..next + g.len()).collect();
            next += g.len();
            idx
        })
        .collect();
    Ok(EnvironmentCollection { schema, pooled, labels, groups })
}

pub fn load_csv(path: &Path, schema: &ColumnSchema) -> Result<EnvironmentCollection> {
    collection_from_table(&Table::read(path)?, schema)
}

/// Pooled OLS comparator: every file row, all causes and background, plus
/// the environment column as an ordinary regressor.
pub fn ols_comparator(table: &Table, schema: &ColumnSchema) -> Result<Vec<InferenceRow>> {
    let schema = schema.clone().checked()?;
    let mut background = schema.resolve_background(&table.headers);
    background.extend(schema.environment.iter().cloned());
    let rows: Vec<usize> = (0..table.rows()).collect();
    Ok(ols_inference_table(&dataset(table, &schema, &background, &rows)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealMode {
    /// Each environment is one subset (all background columns, its own rows).
    Environments,
    /// Random background subsets on the pooled rows.
    RandomSubsets { m: usize, k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealAnalysis {
    pub tested: Vec<String>,
    pub test: PermutationTestResult,
    pub warning: Option<String>,
}

impl RealAnalysis {
    pub fn p_value(&self) -> f64 {
        self.test.p_value
    }
}

/// Tests `tested` (a subset of the schema causes) jointly; the remaining
/// causes join the background.
pub fn run_real_analysis(
    collection: &EnvironmentCollection,
    tested: &[String],
    permutations: usize,
    seed: u64,
    mode: RealMode,
) -> Result<RealAnalysis> {
    if collection.is_empty() {
        return Err(AppError::Empty("no environments".into()));
    }
    let data = &collection.pooled;
    let mut x_idx = Vec::new();
    for t in tested {
        let j = data.names_x().iter().position(|n| n == t).ok_or_else(|| AppError::MissingColumn(t.clone()))?;
        if !x_idx.contains(&j) {
            x_idx.push(j);
        }
    }
    if x_idx.is_empty() {
        return Err(AppError::Config("no causes to test".into()));
    }
    let rest: Vec<usize> = (0..data.n_causes()).filter(|j| !x_idx.contains(j)).collect();
    let x = data.x().select_columns(&x_idx);
    let mut w_names: Vec<String> = rest.iter().map(|&j| data.names_x()[j].clone()).collect();
    w_names.extend(data.names_w().iter().cloned());
    let w = DMatrix::from_fn(data.rows(), w_names.len(), |i, c| {
        if c < rest.len() {
            data.x()[(i, rest[c])]
        } else {
            data.w()[(i, c - rest.len())]
        }
    });
    let names_x: Vec<String> = x_idx.iter().map(|&j| data.names_x()[j].clone()).collect();
    let regrouped = Dataset::with_names(data.y().clone(), x, w, names_x.clone(), w_names)?;
    let (test, warning) = match mode {
        RealMode::Environments => {
            let warning = (collection.len() == 1)
                .then(|| "a single environment gives a zero statistic; the p-value is uninformative".to_string());
            (environment_test(&regrouped, &collection.groups, permutations, seed)?.0, warning)
        }
        RealMode::RandomSubsets { m, k } => {
            let warning = (m == 1).then(|| "m = 1 gives a zero statistic; the p-value is uninformative".to_string());
            let opts = RsOptions { m, k, permutations, nuisance: Nuisance::Uniform, seed };
            (rs_test(&regrouped, &opts)?.test, warning)
        }
    };
    Ok(RealAnalysis { tested: names_x, test, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(env_sizes: &[usize]) -> Table {
        let mut s = String::from("id,y,x1,w1,w2,env\n");
        let mut i = 0;
        for (e, &n) in env_sizes.iter().enumerate() {
            for _ in 0..n {
                let a = (i as f64 * 0.37).sin();
                let b = (i as f64 * 1.13).cos();
                let c = (i as f64 * 0.71).sin() * (i as f64 * 0.05).cos();
                s.push_str(&format!("r{i},{},{a},{b},{c},{}\n", a + b + c, e + 1));
                i += 1;
            }
        }
        Table::from_reader(s.as_bytes()).unwrap()
    }

    fn schema() -> ColumnSchema {
        ColumnSchema {
            target: "y".into(),
            causes: vec!["x1".into()],
            environment: Some("env".into()),
            background: Vec::new(),
            drop: vec!["id".into()],
            min_env_size: 70,
        }
    }

    #[test]
    fn size_filter_keeps_large_groups() {
        let c = collection_from_table(&table(&[100, 80, 50]), &schema()).unwrap();
        assert_eq!(c.labels, vec!["1", "2"]);
        assert_eq!(c.total_rows(), 180);
        assert_eq!(c.pooled.names_w(), &["w1".to_string(), "w2".to_string()]);
        let members = c.members().unwrap();
        assert_eq!(members[1].1.rows(), 80);
    }

    #[test]
    fn no_environment_is_one_group() {
        let s = ColumnSchema { environment: None, drop: vec!["id".into(), "env".into()], ..schema() };
        let c = collection_from_table(&table(&[30, 20]), &ColumnSchema { min_env_size: 70, ..s.clone() });
        assert!(matches!(c, Err(AppError::Empty(_))));
        let c = collection_from_table(&table(&[30, 20]), &ColumnSchema { min_env_size: 10, ..s }).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.total_rows(), 50);
    }

    #[test]
    fn named_errors() {
        let t = table(&[80]);
        let missing = ColumnSchema { causes: vec!["x9".into()], ..schema() };
        assert!(matches!(collection_from_table(&t, &missing), Err(AppError::MissingColumn(c)) if c == "x9"));
        let undropped = ColumnSchema { drop: Vec::new(), ..schema() };
        assert!(matches!(
            collection_from_table(&t, &undropped),
            Err(AppError::NonNumeric { row: 1, ref column, .. }) if column == "id"
        ));
        let dup = ColumnSchema { background: vec!["x1".into()], ..schema() };
        assert!(matches!(collection_from_table(&t, &dup), Err(AppError::Schema(_))));
    }

    #[test]
    fn schema_round_trip_preserves_grouping() {
        let t = table(&[90, 75, 10]);
        let text = serde_json::to_string(&schema()).unwrap();
        let back: ColumnSchema = serde_json::from_str(&text).unwrap();
        assert_eq!(collection_from_table(&t, &back).unwrap(), collection_from_table(&t, &schema()).unwrap());
        let minimal: ColumnSchema = serde_json::from_str(r#"{"target":"y","causes":["x1"]}"#).unwrap();
        assert_eq!(minimal.min_env_size, 70);
    }

    #[test]
    fn single_environment_warns() {
        let s = ColumnSchema { min_env_size: 100, ..schema() };
        let c = collection_from_table(&table(&[120, 80]), &s).unwrap();
        let r = run_real_analysis(&c, &["x1".into()], 19, 0, RealMode::Environments).unwrap();
        assert!(r.warning.is_some());
        assert_eq!(r.p_value(), 1.0);
    }

    #[test]
    fn comparator_includes_environment() {
        let t = table(&[80, 80, 10]);
        let rows = ols_comparator(&t, &schema()).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
        assert!(names.contains(&"env") && names.contains(&"x1"));
    }
}
