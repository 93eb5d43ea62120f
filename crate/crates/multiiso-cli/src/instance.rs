//! Instance files: a model tuple as JSON, with optional parameters and tolerances.

use multiiso::model::{ModelTuple, Pair};
use multiiso::numcore::{CMatrix, Subspace, Tolerances};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Complex matrix as rows of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairJson {
    #[serde(rename = "U")]
    pub u: MatrixJson,
    #[serde(rename = "P")]
    pub p: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq: Option<f64>,
}

/// Choice of `Q_1` for `build3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Q1Json {
    Named(Q1Name),
    /// Columns spanning `Q_1` inside the space, `dim` rows.
    Basis(MatrixJson),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Q1Name {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<Q1Json>,
}

impl ParamsJson {
    fn is_empty(&self) -> bool {
        self.q1.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub dim: usize,
    pub n: usize,
    pub tuple: Vec<PairJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesJson>,
}

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Rows must all have `cols` entries; `cols = None` takes the first row's length.
pub fn matrix_from_json(
    rows: &MatrixJson,
    path: &str,
    shape: (usize, Option<usize>),
) -> Result<CMatrix, CliError> {
    let (nrows, cols) = shape;
    if rows.len() != nrows {
        return Err(CliError::Input(format!("{path}: expected {nrows} rows, found {}", rows.len())));
    }
    let ncols = cols.or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(CliError::Input(format!(
                "{path}[{i}]: expected {ncols} entries, found {}",
                row.len()
            )));
        }
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
        let [re, im] = rows[i][j];
        Complex64::new(re, im)
    }))
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: InstanceFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            CliError::Input(format!(
                "{} (line {}, column {}): {}",
                e.path(),
                inner.line(),
                inner.column(),
                inner
            ))
        })?;
        if file.tuple.is_empty() {
            return Err(CliError::Input("tuple: at least one pair is required".into()));
        }
        if file.dim == 0 {
            return Err(CliError::Input("dim: must be positive".into()));
        }
        Ok(file)
    }

    pub fn from_tuple(t: &ModelTuple) -> Self {
        InstanceFile {
            dim: t.dim(),
            n: t.n(),
            tuple: t
                .pairs()
                .iter()
                .map(|p| PairJson {
                    u: matrix_to_json(&p.u),
                    p: matrix_to_json(&p.p),
                })
                .collect(),
            params: None,
            tolerances: None,
        }
    }

    /// Normalized text; parsing it back and writing again is byte identical.
    pub fn to_text(&self, pretty: bool) -> String {
        let mut file = self.clone();
        if file.params.as_ref().is_some_and(ParamsJson::is_empty) {
            file.params = None;
        }
        let v = serde_json::to_value(&file).expect("instance files serialize");
        crate::json::to_text(&v, pretty)
    }

    /// All pairs as matrices checked against `dim`.
    pub fn pairs(&self) -> Result<Vec<Pair>, CliError> {
        let d = self.dim;
        self.tuple
            .iter()
            .enumerate()
            .map(|(k, pj)| {
                let u = matrix_from_json(&pj.u, &format!("tuple[{k}].U"), (d, Some(d)))?;
                let p = matrix_from_json(&pj.p, &format!("tuple[{k}].P"), (d, Some(d)))?;
                Ok(Pair::new(u, p))
            })
            .collect()
    }

    /// Pairs as a model tuple, requiring `n` entries.
    pub fn tuple(&self, tol: &Tolerances) -> Result<ModelTuple, CliError> {
        if self.tuple.len() != self.n {
            return Err(CliError::Input(format!(
                "tuple: n is {} but {} pairs are given",
                self.n,
                self.tuple.len()
            )));
        }
        ModelTuple::new(self.pairs()?, tol).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn params(&self) -> ParamsJson {
        self.params.clone().unwrap_or_default()
    }

    /// `params.q1` as an explicit subspace of the space, if given as a basis.
    pub fn q1_basis(&self, tol: &Tolerances) -> Result<Option<Subspace>, CliError> {
        match self.params().q1 {
            Some(Q1Json::Basis(rows)) => {
                let m = matrix_from_json(&rows, "params.q1", (self.dim, None))?;
                Ok(Some(multiiso::numcore::span(&m, tol)))
            }
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"dim": 1, "n": 1, "tuple": [{"U": [[[1, 0]]], "P": [[[1, 0]]]}]}"#;

    #[test]
    fn parses_and_normalizes() {
        let f = InstanceFile::parse(SAMPLE).unwrap();
        let text = f.to_text(false);
        assert_eq!(
            text,
            "{\"dim\":1,\"n\":1,\"tuple\":[{\"P\":[[[1.0000000000000000e0,0.0000000000000000e0]]],\
             \"U\":[[[1.0000000000000000e0,0.0000000000000000e0]]]}]}\n"
        );
        for pretty in [false, true] {
            let once = f.to_text(pretty);
            assert_eq!(InstanceFile::parse(&once).unwrap().to_text(pretty), once);
        }
    }

    #[test]
    fn rejects_unknown_fields_with_path() {
        let bad = SAMPLE.replace("\"P\"", "\"Q\"");
        let err = InstanceFile::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("tuple[0]"), "{err}");
        assert!(err.contains("line 1"), "{err}");
        let extra = SAMPLE.replace("\"n\": 1", "\"n\": 1, \"size\": 2");
        assert!(InstanceFile::parse(&extra).is_err());
    }

    #[test]
    fn rejects_empty_tuple_and_ragged_rows() {
        let empty = r#"{"dim": 1, "n": 0, "tuple": []}"#;
        assert!(InstanceFile::parse(empty).is_err());
        let ragged = r#"{"dim": 2, "n": 1, "tuple": [{"U": [[[1, 0], [0, 0]], [[0, 0]]], "P": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]}]}"#;
        let f = InstanceFile::parse(ragged).unwrap();
        let err = f.pairs().unwrap_err().to_string();
        assert!(err.contains("tuple[0].U[1]"), "{err}");
    }

    #[test]
    fn q1_accepts_names_and_bases() {
        let named = SAMPLE.replace("\"n\": 1", "\"n\": 1, \"params\": {\"q1\": \"max\"}");
        let f = InstanceFile::parse(&named).unwrap();
        assert_eq!(f.params().q1, Some(Q1Json::Named(Q1Name::Max)));
        let basis = SAMPLE.replace("\"n\": 1", "\"n\": 1, \"params\": {\"q1\": [[[1, 0]]]}");
        let f = InstanceFile::parse(&basis).unwrap();
        assert_eq!(f.q1_basis(&Tolerances::default()).unwrap().unwrap().dim(), 1);
    }
}
