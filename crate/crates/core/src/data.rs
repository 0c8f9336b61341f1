//! Column-major data matrix with NaN as the missing marker, and CSV I/O.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The 47-star CYG OB1 cluster: log effective temperature and log light intensity.
pub const STARS_CSV: &str = include_str!("../data/stars.csv");

/// An `n × d` matrix of cases by variables.
///
/// Missing cells are stored as NaN. Columns are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T> {
    n: usize,
    d: usize,
    values: Vec<T>,
    names: Vec<String>,
}

fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("V{}", j)).collect()
}

impl<T: Scalar> DataMatrix<T> {
    /// Build from column-major values.
    pub fn from_col_major(
        n: usize,
        d: usize,
        values: Vec<T>,
        names: Option<Vec<String>>,
    ) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::Input(format!(
                "expected {}×{} = {} values, got {}",
                n,
                d,
                n * d,
                values.len()
            )));
        }
        let names = names.unwrap_or_else(|| default_names(d));
        if names.len() != d {
            return Err(Error::Input(format!(
                "expected {} column names, got {}",
                d,
                names.len()
            )));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::Input(
                "infinite values are not allowed; use NaN for missing".into(),
            ));
        }
        Ok(Self {
            n,
            d,
            values,
            names,
        })
    }

    pub fn from_columns(columns: Vec<Vec<T>>) -> Result<Self> {
        let d = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Input("columns differ in length".into()));
        }
        Self::from_col_major(n, d, columns.concat(), None)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Input("ragged rows".into()));
        }
        let mut values = Vec::with_capacity(n * d);
        for j in 0..d {
            values.extend(rows.iter().map(|r| r[j]));
        }
        Self::from_col_major(n, d, values, None)
    }

    /// Build with `f(i, j)` for every cell.
    pub fn from_fn(n: usize, d: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(n * d);
        for j in 0..d {
            for i in 0..n {
                values.push(f(i, j));
            }
        }
        Self {
            n,
            d,
            values,
            names: default_names(d),
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return Err(Error::Input(format!(
                "expected {} column names, got {}",
                self.d,
                names.len()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> + '_ {
        // chunks_exact panics on zero size
        (0..self.d).map(move |j| self.column(j))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[j * self.n + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[j * self.n + i] = v;
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_nan()
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.d).map(|j| self.get(i, j)).collect()
    }

    /// Column-major backing slice.
    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.n * idx.len());
        for &j in idx {
            values.extend_from_slice(self.column(j));
        }
        Self {
            n: self.n,
            d: idx.len(),
            values,
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.d);
        for j in 0..self.d {
            let col = self.column(j);
            values.extend(idx.iter().map(|&i| col[i]));
        }
        Self {
            n: idx.len(),
            d: self.d,
            values,
            names: self.names.clone(),
        }
    }

    /// Convert the storage type.
    pub fn cast<U: Scalar>(&self) -> DataMatrix<U> {
        DataMatrix {
            n: self.n,
            d: self.d,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            names: self.names.clone(),
        }
    }

    /// Parse CSV text with a header row. Lines starting with `#` are skipped;
    /// empty fields and `NA` are missing.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Input(format!("cannot read CSV header: {}", e)))?
            .iter()
            .map(str::to_string)
            .collect();
        if names.is_empty() || names.iter().all(String::is_empty) {
            return Err(Error::Input("CSV has no header".into()));
        }
        let d = names.len();
        let mut cols: Vec<Vec<T>> = vec![Vec::new(); d];
        for (line, record) in rdr.records().enumerate() {
            let record =
                record.map_err(|e| Error::Input(format!("CSV record {}: {}", line + 1, e)))?;
            if record.len() != d {
                return Err(Error::Input(format!(
                    "CSV record {} has {} fields, header has {}",
                    line + 1,
                    record.len(),
                    d
                )));
            }
            for (j, field) in record.iter().enumerate() {
                let v = if field.is_empty() || field == "NA" {
                    T::nan()
                } else {
                    let x: f64 = field.parse().map_err(|_| {
                        Error::Input(format!(
                            "CSV record {}, column '{}': cannot parse '{}' as a number",
                            line + 1,
                            names[j],
                            field
                        ))
                    })?;
                    if !x.is_finite() {
                        return Err(Error::Input(format!(
                            "CSV record {}, column '{}': non-finite value '{}'",
                            line + 1,
                            names[j],
                            field
                        )));
                    }
                    T::lit(x)
                };
                cols[j].push(v);
            }
        }
        let n = cols[0].len();
        Self::from_col_major(n, d, cols.concat(), Some(names))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    /// Write as CSV with a header; missing cells are written as `NA`.
    pub fn write_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let rows: Vec<Vec<f64>> = (0..self.n)
            .map(|i| self.row(i).into_iter().map(Scalar::as_f64).collect())
            .collect();
        write_table(path, comment, None, &self.names, &rows)
    }
}

impl DataMatrix<f64> {
    /// The bundled CYG OB1 stars data.
    pub fn stars() -> Self {
        Self::from_csv_reader(STARS_CSV.as_bytes()).expect("bundled stars data parses")
    }
}

/// Format a number with 17 significant digits; NaN becomes `NA`.
pub fn fmt_full(x: f64) -> String {
    if x.is_nan() {
        "NA".to_string()
    } else {
        format!("{:.16e}", x)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Input(format!("writing '{}': {:?}", path.display(), other)),
    }
}

/// Write a numeric table. With `row_names`, the first column holds them and
/// its header is empty.
pub fn write_table(
    path: impl AsRef<Path>,
    comment: Option<&str>,
    row_names: Option<&[String]>,
    col_names: &[String],
    rows: &[Vec<f64>],
) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    if let Some(c) = comment {
        writeln!(file, "# {}", c).map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = Vec::with_capacity(col_names.len() + 1);
    if row_names.is_some() {
        header.push("");
    }
    header.extend(col_names.iter().map(String::as_str));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(row.len() + 1);
        if let Some(names) = row_names {
            rec.push(names[i].clone());
        }
        rec.extend(row.iter().map(|&x| fmt_full(x)));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write a string table (mixed content) with an optional comment line.
pub fn write_records(
    path: impl AsRef<Path>,
    comment: Option<&str>,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    if let Some(c) = comment {
        writeln!(file, "# {}", c).map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_missing_markers() {
        let text = "# note\na,b\n1,NA\n,2.5\n3,4\n";
        let m = DataMatrix::<f64>::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (3, 2));
        assert!(m.is_missing(0, 1));
        assert!(m.is_missing(1, 0));
        assert_eq!(m.get(1, 1), 2.5);
        assert_eq!(m.names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(m.missing_count(), 2);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(DataMatrix::<f64>::from_csv_reader("a,b\n1,x\n".as_bytes()).is_err());
        assert!(DataMatrix::<f64>::from_csv_reader("a,b\n1\n".as_bytes()).is_err());
        assert!(DataMatrix::<f64>::from_csv_reader("a\ninf\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_roundtrip_full_precision() {
        let m = DataMatrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![f64::NAN, -2e-300]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        m.write_csv(&path, Some("test")).unwrap();
        let back = DataMatrix::<f64>::read_csv(&path).unwrap();
        assert_eq!(back.get(0, 1), 1.0 / 3.0);
        assert_eq!(back.get(1, 1), -2e-300);
        assert!(back.is_missing(1, 0));
    }

    #[test]
    fn stars_fixture() {
        let s = DataMatrix::stars();
        assert_eq!((s.nrows(), s.ncols()), (47, 2));
        assert_eq!(s.get(10, 0), 3.49);
    }

    #[test]
    fn layout() {
        let m = DataMatrix::from_fn(3, 2, |i, j| (10 * i + j) as f32);
        assert_eq!(m.column(1), &[1.0, 11.0, 21.0]);
        assert_eq!(m.row(2), vec![20.0, 21.0]);
        let s = m.select_columns(&[1]).select_rows(&[0, 2]);
        assert_eq!(s.as_slice(), &[1.0, 21.0]);
        assert_eq!(s.name(0), "V2");
    }
}
