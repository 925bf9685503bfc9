//! Nodal field CSV: header `x,y,value`, one row per node in node order.

use std::path::Path;

use super::Mesh;
use crate::field::Field;
use crate::{Error, Result};

/// A field read back from CSV together with its node coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldCsv {
    pub coords: Vec<[f64; 2]>,
    pub field: Field,
}

/// 17 significant digits, so every f64 survives a round trip.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub fn write_field_csv(path: impl AsRef<Path>, mesh: &Mesh, field: &Field) -> Result<()> {
    let path = path.as_ref();
    field.check_len(mesh.node_count())?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["x", "y", "value"])
        .map_err(|e| csv_error(path, e))?;
    for (p, v) in mesh.nodes().iter().zip(field.iter()) {
        w.write_record([fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(*v)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: impl AsRef<Path>) -> Result<FieldCsv> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["x", "y", "value"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header x,y,value, found {:?}", header),
        });
    }
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column {} is not a number: {raw:?}", i + 1),
            })
        };
        coords.push([parse(0)?, parse(1)?]);
        values.push(parse(2)?);
    }
    Ok(FieldCsv {
        coords,
        field: Field::from_vec(values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_mesh, project_function, Rect};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_mesh(20, 20, Rect::UNIT).unwrap();
        let f = project_function(&mesh, |x, y| (x * 3.7).exp() / (1.0 + y) + 1e-300 * x);
        let path = dir.path().join("f.csv");
        write_field_csv(&path, &mesh, &f).unwrap();
        let back = read_field_csv(&path).unwrap();
        assert_eq!(back.field, f);
        assert_eq!(back.coords, mesh.nodes());
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 442);
    }

    #[test]
    fn zero_field_keeps_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_mesh(3, 2, Rect::UNIT).unwrap();
        let path = dir.path().join("z.csv");
        write_field_csv(&path, &mesh, &Field::zeros(12)).unwrap();
        let back = read_field_csv(&path).unwrap();
        assert!(back.field.iter().all(|v| *v == 0.0));
        assert_eq!(back.coords, mesh.nodes());
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,y,value\n0,0,1\n0.5,0,oops\n").unwrap();
        match read_field_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&path, "x,y,value\n0,0,1\n0.5,0\n").unwrap();
        assert!(matches!(read_field_csv(&path), Err(Error::Parse { line: 3, .. })));
    }
}
