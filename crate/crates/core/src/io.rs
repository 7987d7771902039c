//! Plain-text exchange formats.
//!
//! * Dense matrices: a `rows cols` header line, then the values row-major,
//!   one row per line. Vectors are `n 1` matrices.
//! * Convection tensors: an `r r r` header, then the entries slice-major.
//! * Sparse matrices: coordinate lists compatible with Matrix Market, a
//!   `rows cols nnz` size line followed by 1-based `i j value` lines. Lines
//!   starting with `%` are comments.
//! * Series: comma-separated with a header row; undefined entries are empty.
//!
//! Values are written with 17 significant digits, so a write/read cycle
//! reproduces every `f64` (and `f32`) bit for bit. Dense and tensor files
//! accept `#` comments.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{check_dim, RomError, RomResult};
use crate::operators::{ConvectionTensor, RomOperators};
use crate::pod::PodBasis;
use crate::scalar::Real;

fn fmt_value<T: Real>(v: T) -> String {
    format!("{v:.16e}")
}

fn parse_error(line: usize, message: impl Into<String>) -> RomError {
    RomError::Parse {
        line,
        message: message.into(),
    }
}

/// Tokens paired with their 1-based line numbers, comments stripped.
fn tokens(text: &str, comment: char) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().flat_map(move |(k, line)| {
        let body = line.split(comment).next().unwrap_or("");
        body.split_whitespace().map(move |t| (k + 1, t))
    })
}

fn parse_value<T: Real>(line: usize, tok: &str) -> RomResult<T> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_error(line, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, format!("`{tok}` is not finite")));
    }
    T::from_f64(v).ok_or_else(|| parse_error(line, format!("`{tok}` out of range")))
}

fn parse_count(line: usize, tok: &str) -> RomResult<usize> {
    tok.parse()
        .map_err(|_| parse_error(line, format!("`{tok}` is not a nonnegative integer")))
}

/// Reads a header of `n_dims` integers followed by exactly `product` values.
fn parse_shaped<T: Real>(text: &str, n_dims: usize) -> RomResult<(Vec<usize>, Vec<T>)> {
    let mut toks = tokens(text, '#').peekable();
    let header_line = toks.peek().map_or(1, |&(l, _)| l);
    let mut shape = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        match toks.next() {
            Some((l, t)) if l == header_line => shape.push(parse_count(l, t)?),
            _ => {
                return Err(parse_error(
                    header_line,
                    format!("header must hold {n_dims} dimensions"),
                ))
            }
        }
    }
    if let Some(&(l, t)) = toks.peek() {
        if l == header_line {
            return Err(parse_error(l, format!("unexpected `{t}` in header")));
        }
    }
    let expected: usize = shape.iter().product();
    let mut values = Vec::with_capacity(expected);
    let mut last_line = header_line;
    for (l, t) in toks {
        if values.len() == expected {
            return Err(parse_error(
                l,
                format!("more than the declared {expected} values"),
            ));
        }
        values.push(parse_value(l, t)?);
        last_line = l;
    }
    if values.len() != expected {
        return Err(parse_error(
            last_line,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok((shape, values))
}

pub fn format_matrix<T: Real>(m: &DMatrix<T>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| fmt_value(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix<T: Real>(text: &str) -> RomResult<DMatrix<T>> {
    let (shape, values) = parse_shaped(text, 2)?;
    Ok(DMatrix::from_row_slice(shape[0], shape[1], &values))
}

pub fn format_vector<T: Real>(v: &DVector<T>) -> String {
    format_matrix(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

/// Accepts `n 1` and `1 n` files.
pub fn parse_vector<T: Real>(text: &str) -> RomResult<DVector<T>> {
    let m = parse_matrix::<T>(text)?;
    if m.ncols() == 1 || m.nrows() == 1 {
        Ok(DVector::from_iterator(m.len(), m.iter().copied()))
    } else {
        Err(parse_error(
            1,
            format!("expected a vector, found {}×{}", m.nrows(), m.ncols()),
        ))
    }
}

pub fn format_tensor<T: Real>(t: &ConvectionTensor<T>) -> String {
    let r = t.r();
    let mut out = format!("{r} {r} {r}\n");
    if r > 0 {
        for row in t.as_slice().chunks(r) {
            let line: Vec<String> = row.iter().map(|&v| fmt_value(v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn parse_tensor<T: Real>(text: &str) -> RomResult<ConvectionTensor<T>> {
    let (shape, values) = parse_shaped(text, 3)?;
    if shape[0] != shape[1] || shape[1] != shape[2] {
        return Err(parse_error(
            1,
            format!("tensor must be cubic, header is {shape:?}"),
        ));
    }
    ConvectionTensor::from_vec(shape[0], values)
}

pub fn format_coordinate<T: Real>(m: &CsrMatrix<T>) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", m.nrows(), m.ncols(), m.nnz()));
    for (i, j, &v) in m.triplet_iter() {
        out.push_str(&format!("{} {} {}\n", i + 1, j + 1, fmt_value(v)));
    }
    out
}

/// Parses a coordinate list; repeated entries are summed.
pub fn parse_coordinate<T: Real>(text: &str) -> RomResult<CsrMatrix<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, "missing size line"))?;
    let size: Vec<&str> = header.split_whitespace().collect();
    if size.len() != 3 {
        return Err(parse_error(hl, "size line must be `rows cols nnz`"));
    }
    let (rows, cols, nnz) = (
        parse_count(hl, size[0])?,
        parse_count(hl, size[1])?,
        parse_count(hl, size[2])?,
    );
    let mut coo = CooMatrix::new(rows, cols);
    let mut seen = 0;
    let mut last = hl;
    for (l, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_error(l, "entry lines must be `i j value`"));
        }
        let (i, j) = (parse_count(l, f[0])?, parse_count(l, f[1])?);
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(parse_error(
                l,
                format!("index ({i}, {j}) outside {rows}×{cols}"),
            ));
        }
        coo.push(i - 1, j - 1, parse_value(l, f[2])?);
        seen += 1;
        last = l;
    }
    if seen != nnz {
        return Err(parse_error(
            last,
            format!("declared {nnz} entries, found {seen}"),
        ));
    }
    Ok(CsrMatrix::from(&coo))
}

/// Named columns of equal length; `None` marks an undefined entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable<T> {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<Option<T>>>,
}

impl<T: Real> SeriesTable<T> {
    pub fn new() -> Self {
        Self {
            headers: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, column: Vec<Option<T>>) -> RomResult<()> {
        if let Some(first) = self.columns.first() {
            check_dim(
                &format!("series column `{name}`"),
                column.len(),
                first.len(),
            )?;
        }
        self.headers.push(name.to_string());
        self.columns.push(column);
        Ok(())
    }

    pub fn push_defined(&mut self, name: &str, column: &[T]) -> RomResult<()> {
        self.push(name, column.iter().map(|&v| Some(v)).collect())
    }

    pub fn column(&self, name: &str) -> Option<&[Option<T>]> {
        let k = self.headers.iter().position(|h| h == name)?;
        Some(&self.columns[k])
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

impl<T: Real> Default for SeriesTable<T> {
    fn default() -> Self {
        Self::new()
    }
}

pub fn format_series<T: Real>(table: &SeriesTable<T>) -> String {
    let mut out = table.headers.join(",");
    out.push('\n');
    for k in 0..table.n_rows() {
        let row: Vec<String> = table
            .columns
            .iter()
            .map(|c| c[k].map(fmt_value).unwrap_or_default())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_series<T: Real>(text: &str) -> RomResult<SeriesTable<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, "missing header row"))?;
    let headers: Vec<String> = header.split(',').map(|h| h.trim().to_string()).collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for (k, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != headers.len() {
            return Err(parse_error(
                k + 1,
                format!("{} fields, header has {}", fields.len(), headers.len()),
            ));
        }
        for (col, f) in columns.iter_mut().zip(fields) {
            let f = f.trim();
            col.push(if f.is_empty() {
                None
            } else {
                Some(parse_value(k + 1, f)?)
            });
        }
    }
    Ok(SeriesTable { headers, columns })
}

/// Writes through a sibling temporary file and a rename, so readers never
/// observe a half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> RomResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read(path: &Path) -> RomResult<String> {
    fs::read_to_string(path).map_err(|e| {
        RomError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Prefixes parse errors with the file they came from.
fn in_file<T>(path: &Path, r: RomResult<T>) -> RomResult<T> {
    r.map_err(|e| match e {
        RomError::Parse { line, message } => RomError::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn read_matrix<T: Real>(path: &Path) -> RomResult<DMatrix<T>> {
    in_file(path, parse_matrix(&read(path)?))
}

pub fn read_vector<T: Real>(path: &Path) -> RomResult<DVector<T>> {
    in_file(path, parse_vector(&read(path)?))
}

pub fn read_tensor<T: Real>(path: &Path) -> RomResult<ConvectionTensor<T>> {
    in_file(path, parse_tensor(&read(path)?))
}

pub fn read_coordinate<T: Real>(path: &Path) -> RomResult<CsrMatrix<T>> {
    in_file(path, parse_coordinate(&read(path)?))
}

pub fn read_series<T: Real>(path: &Path) -> RomResult<SeriesTable<T>> {
    in_file(path, parse_series(&read(path)?))
}

pub fn write_matrix<T: Real>(path: &Path, m: &DMatrix<T>) -> RomResult<()> {
    write_atomic(path, &format_matrix(m))
}

pub fn write_vector<T: Real>(path: &Path, v: &DVector<T>) -> RomResult<()> {
    write_atomic(path, &format_vector(v))
}

pub fn write_tensor<T: Real>(path: &Path, t: &ConvectionTensor<T>) -> RomResult<()> {
    write_atomic(path, &format_tensor(t))
}

pub fn write_coordinate<T: Real>(path: &Path, m: &CsrMatrix<T>) -> RomResult<()> {
    write_atomic(path, &format_coordinate(m))
}

pub fn write_series<T: Real>(path: &Path, table: &SeriesTable<T>) -> RomResult<()> {
    write_atomic(path, &format_series(table))
}

/// Basis directory layout: `centering.txt`, `modes.txt`, `eigenvalues.txt`.
pub fn write_pod_basis<T: Real>(dir: &Path, basis: &PodBasis<T>) -> RomResult<()> {
    write_vector(&dir.join("centering.txt"), &basis.centering)?;
    write_matrix(&dir.join("modes.txt"), &basis.modes)?;
    write_vector(
        &dir.join("eigenvalues.txt"),
        &DVector::from_vec(basis.eigenvalues.clone()),
    )
}

pub fn read_pod_basis<T: Real>(dir: &Path) -> RomResult<PodBasis<T>> {
    let centering = read_vector(&dir.join("centering.txt"))?;
    let modes = read_matrix::<T>(&dir.join("modes.txt"))?;
    let eigenvalues: Vec<T> = read_vector::<T>(&dir.join("eigenvalues.txt"))?
        .iter()
        .copied()
        .collect();
    check_dim("basis centering", centering.len(), modes.nrows())?;
    if eigenvalues.len() < modes.ncols() {
        return Err(RomError::invalid(format!(
            "{} eigenvalues for {} modes",
            eigenvalues.len(),
            modes.ncols()
        )));
    }
    Ok(PodBasis {
        centering,
        modes,
        eigenvalues,
    })
}

const OPERATOR_MATRICES: [&str; 5] = [
    "mass",
    "stiffness",
    "a_lin",
    "conv_center_left",
    "conv_center_right",
];
const OPERATOR_VECTORS: [&str; 3] = ["b", "center_mass", "center_stiffness"];

/// One file per field: `<field>.txt` for the matrices and vectors,
/// `tensor.txt` and a `1 1` file `nu.txt`.
pub fn write_rom_operators<T: Real>(dir: &Path, ops: &RomOperators<T>) -> RomResult<()> {
    ops.validate()?;
    let mats = [
        &ops.mass,
        &ops.stiffness,
        &ops.a_lin,
        &ops.conv_center_left,
        &ops.conv_center_right,
    ];
    for (name, m) in OPERATOR_MATRICES.iter().zip(mats) {
        write_matrix(&dir.join(format!("{name}.txt")), m)?;
    }
    let vecs = [&ops.b, &ops.center_mass, &ops.center_stiffness];
    for (name, v) in OPERATOR_VECTORS.iter().zip(vecs) {
        write_vector(&dir.join(format!("{name}.txt")), v)?;
    }
    write_tensor(&dir.join("tensor.txt"), &ops.tensor)?;
    write_vector(&dir.join("nu.txt"), &DVector::from_element(1, ops.nu))
}

pub fn read_rom_operators<T: Real>(dir: &Path) -> RomResult<RomOperators<T>> {
    let m = |name: &str| read_matrix::<T>(&dir.join(format!("{name}.txt")));
    let v = |name: &str| read_vector::<T>(&dir.join(format!("{name}.txt")));
    let nu = v("nu")?;
    check_dim("nu file", nu.len(), 1)?;
    let ops = RomOperators {
        nu: nu[0],
        mass: m("mass")?,
        stiffness: m("stiffness")?,
        b: v("b")?,
        a_lin: m("a_lin")?,
        conv_center_left: m("conv_center_left")?,
        conv_center_right: m("conv_center_right")?,
        tensor: read_tensor(&dir.join("tensor.txt"))?,
        center_mass: v("center_mass")?,
        center_stiffness: v("center_stiffness")?,
    };
    ops.validate()?;
    Ok(ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matrix_text_layout() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, -0.5]);
        let text = format_matrix(&m);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("2 3"));
        assert_eq!(
            lines.next(),
            Some("1.0000000000000000e0 2.0000000000000000e0 3.0000000000000000e0")
        );
        assert_eq!(parse_matrix::<f64>(&text).unwrap(), m);
        let loose = "# comment\n2 2\n1 2 3\n4 # trailing\n";
        assert_eq!(
            parse_matrix::<f64>(loose).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let line_of = |r: RomResult<DMatrix<f64>>| match r {
            Err(RomError::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(line_of(parse_matrix("2 2\n1 2\n3 x\n")), 3);
        assert_eq!(line_of(parse_matrix("2 2\n1 2\n3\n")), 3);
        assert_eq!(line_of(parse_matrix("2 2\n1 2\n3 4\n5\n")), 4);
        assert_eq!(line_of(parse_matrix("2\n1 2\n")), 1);
        assert_eq!(line_of(parse_matrix("1 1\nnan\n")), 2);
        assert_eq!(line_of(parse_matrix("1 1\ninf\n")), 2);
        assert!(parse_vector::<f64>("2 2\n1 2 3 4\n").is_err());
    }

    #[test]
    fn tensor_round_trip_is_slice_major() {
        let t = ConvectionTensor::from_fn(2, |i, m, n| (100 * i + 10 * m + n) as f64);
        let text = format_tensor(&t);
        assert!(text
            .starts_with("2 2 2\n0.0000000000000000e0 1.0000000000000000e0\n1.0000000000000000e1"));
        assert_eq!(parse_tensor::<f64>(&text).unwrap(), t);
        assert!(parse_tensor::<f64>("2 2 3\n").is_err());
    }

    #[test]
    fn coordinate_format() {
        let text = "%%MatrixMarket matrix coordinate real general\n% note\n3 3 4\n1 1 2.0\n2 3 -1\n3 3 5\n1 1 0.5\n";
        let m = parse_coordinate::<f64>(text).unwrap();
        let dense = crate::linalg::csr_to_dense(&m);
        assert_eq!(
            dense,
            DMatrix::from_row_slice(3, 3, &[2.5, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 5.0])
        );
        let back = parse_coordinate::<f64>(&format_coordinate(&m)).unwrap();
        assert_eq!(crate::linalg::csr_to_dense(&back), dense);
        assert!(matches!(
            parse_coordinate::<f64>("2 2 1\n3 1 1.0\n"),
            Err(RomError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_coordinate::<f64>("2 2 2\n1 1 1.0\n"),
            Err(RomError::Parse { .. })
        ));
    }

    #[test]
    fn series_with_undefined_entries() {
        let mut t = SeriesTable::new();
        t.push_defined("time", &[0.0, 0.5]).unwrap();
        t.push("re", vec![None, Some(-12.5)]).unwrap();
        let text = format_series(&t);
        assert_eq!(text.lines().next(), Some("time,re"));
        assert!(text.lines().nth(1).unwrap().ends_with(','));
        assert_eq!(parse_series::<f64>(&text).unwrap(), t);
        assert!(t.push("bad", vec![None]).is_err());
    }

    #[test]
    fn directory_round_trips() {
        let dir = std::env::temp_dir().join(format!("regrom-io-{}", std::process::id()));
        let basis = PodBasis {
            centering: DVector::from_vec(vec![0.1, 0.2, 0.3]),
            modes: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            eigenvalues: vec![2.0, 1.0 / 3.0],
        };
        write_pod_basis(&dir.join("basis"), &basis).unwrap();
        assert_eq!(read_pod_basis::<f64>(&dir.join("basis")).unwrap(), basis);
        let mut ops = RomOperators::linear(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]),
            1e-3,
        )
        .unwrap();
        ops.tensor = ConvectionTensor::from_fn(2, |i, m, n| (i + 2 * m) as f64 - n as f64 / 7.0);
        ops.b = DVector::from_vec(vec![1.0 / 3.0, -2.0]);
        write_rom_operators(&dir.join("ops"), &ops).unwrap();
        assert_eq!(read_rom_operators::<f64>(&dir.join("ops")).unwrap(), ops);
        fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #[test]
        fn matrix_round_trip_is_bit_exact(
            rows in 0usize..5,
            cols in 0usize..5,
            seed in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 25),
        ) {
            let m = DMatrix::from_fn(rows, cols, |i, j| seed[i * 5 + j]);
            let back = parse_matrix::<f64>(&format_matrix(&m)).unwrap();
            prop_assert_eq!(back.shape(), m.shape());
            for (a, b) in m.iter().zip(back.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn f32_round_trip_is_bit_exact(v in any::<f32>().prop_filter("finite", |v| v.is_finite())) {
            let back = parse_vector::<f32>(&format_vector(&DVector::from_element(1, v))).unwrap();
            prop_assert_eq!(back[0].to_bits(), v.to_bits());
        }
    }
}
