//! Legacy ASCII VTK `STRUCTURED_POINTS` export.
//!
//! The full bounding lattice is written (x fastest) with exterior nodes set to
//! zero, so the Dirichlet extension by zero is explicit in the file.

use std::io::{self, Write};

use super::ScalarField;

pub fn write_vtk<W: Write>(mut w: W, field: &ScalarField, name: &str, title: &str) -> io::Result<()> {
    let grid = field.grid();
    let [nx, ny, nz] = grid.dims();
    let o = grid.origin();
    let h = grid.spacing();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {nx} {ny} {nz}")?;
    writeln!(w, "ORIGIN {:.16e} {:.16e} {:.16e}", o[0], o[1], o[2])?;
    writeln!(w, "SPACING {h:.16e} {h:.16e} {h:.16e}")?;
    writeln!(w, "POINT_DATA {}", nx * ny * nz)?;
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    let values = field.values();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let v = grid.interior_index([i, j, k]).map_or(0.0, |n| values[n]);
                writeln!(w, "{v:.16e}")?;
            }
        }
    }
    Ok(())
}

pub fn vtk_string(field: &ScalarField, name: &str, title: &str) -> String {
    let mut buf = Vec::new();
    write_vtk(&mut buf, field, name, title).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("VTK output is ASCII")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DomainSpec, Grid};

    fn scalars(text: &str) -> Vec<f64> {
        text.lines()
            .skip_while(|l| !l.starts_with("LOOKUP_TABLE"))
            .skip(1)
            .map(|l| l.parse().unwrap())
            .collect()
    }

    #[test]
    fn zero_field_sums_to_zero() {
        let g = Grid::new(DomainSpec::ball(1.0), 9).unwrap();
        let text = vtk_string(&ScalarField::zeros(&g), "u", "zeros");
        let vals = scalars(&text);
        assert_eq!(vals.len(), 9 * 9 * 9);
        assert_eq!(vals.iter().sum::<f64>(), 0.0);
        assert!(text.contains("DIMENSIONS 9 9 9"));
    }

    #[test]
    fn interior_values_round_trip() {
        let g = Grid::new(DomainSpec::ball(1.0), 9).unwrap();
        let u = ScalarField::from_fn(&g, |x| 1.0 + x[0] + 0.1 * x[2]);
        let vals = scalars(&vtk_string(&u, "u", "t"));
        let exported: f64 = vals.iter().sum();
        let direct: f64 = u.values().iter().sum();
        assert!((exported - direct).abs() < 1e-12);
        let [nx, ny, _] = g.dims();
        let c = g.interior_index([4, 4, 4]).unwrap();
        assert_eq!(vals[4 + nx * (4 + ny * 4)], u.values()[c]);
    }
}
