//! Plain-text images: a `rows,cols` line followed by one comma-separated
//! line per image row.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixel values.
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.rows, self.cols);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, what: &str| Error::Io(format!("image line {}: {what}", line + 1));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or(Error::Empty("image"))?;
        let dims: Vec<usize> = head
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(0, "expected `rows,cols`"))?;
        let [rows, cols] = dims[..] else {
            return Err(bad(0, "expected `rows,cols`"));
        };
        let mut data = Vec::with_capacity(rows * cols);
        let mut seen = 0;
        for (i, line) in lines {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(i, "unparsable number"))?;
            if vals.len() != cols {
                return Err(bad(i, &format!("expected {cols} values, found {}", vals.len())));
            }
            data.extend(vals);
            seen += 1;
        }
        if seen != rows {
            return Err(Error::Io(format!("image: expected {rows} rows, found {seen}")));
        }
        Self::new(rows, cols, data)
    }
}

pub fn read_image(path: &Path) -> Result<Image> {
    Image::parse(&std::fs::read_to_string(path)?)
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    std::fs::write(path, image.to_csv())?;
    Ok(())
}
