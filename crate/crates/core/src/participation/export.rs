//! Field map export.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::solver::FieldSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFormat {
    Csv,
    Vtk,
}

/// Writes potential and node-averaged |E|, one row per mesh node.
pub fn write_csv<W: Write>(sol: &FieldSolution, out: &mut W) -> io::Result<()> {
    let e = sol.node_field();
    writeln!(out, "x_um,y_um,phi_V,Emag_V_per_m")?;
    let w = sol.mesh.x.len();
    for (j, &y) in sol.mesh.y.iter().enumerate() {
        for (i, &x) in sol.mesh.x.iter().enumerate() {
            let k = j * w + i;
            writeln!(out, "{x},{y},{},{}", sol.phi[k], e[k])?;
        }
    }
    Ok(())
}

/// Legacy ASCII VTK rectilinear grid with point data `phi` and `Emag`.
pub fn write_vtk<W: Write>(sol: &FieldSolution, out: &mut W) -> io::Result<()> {
    let e = sol.node_field();
    let (nx, ny) = (sol.mesh.x.len(), sol.mesh.y.len());
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "cross-section field, lengths in um")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET RECTILINEAR_GRID")?;
    writeln!(out, "DIMENSIONS {nx} {ny} 1")?;
    let coords = |out: &mut W, name: &str, v: &[f64]| -> io::Result<()> {
        writeln!(out, "{name} {} double", v.len())?;
        for c in v {
            writeln!(out, "{c}")?;
        }
        Ok(())
    };
    coords(out, "X_COORDINATES", &sol.mesh.x)?;
    coords(out, "Y_COORDINATES", &sol.mesh.y)?;
    coords(out, "Z_COORDINATES", &[0.0])?;
    writeln!(out, "POINT_DATA {}", nx * ny)?;
    for (name, data) in [("phi", &sol.phi), ("Emag", &e)] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in data.iter() {
            writeln!(out, "{v}")?;
        }
    }
    Ok(())
}

pub fn write_field<W: Write>(
    sol: &FieldSolution,
    format: FieldFormat,
    out: &mut W,
) -> io::Result<()> {
    match format {
        FieldFormat::Csv => write_csv(sol, out),
        FieldFormat::Vtk => write_vtk(sol, out),
    }
}
