//! Standalone figure-of-merit fit from a previously written sweep table.

use std::io::Write;
use std::path::Path;

use colemit::coherence::{fit_fom, FomPoint};
use colemit::Error;

struct Row {
    n_atoms: usize,
    box_l: f64,
    w0_unsat: f64,
    w_unsat: f64,
}

fn parse_table(text: &str) -> Result<Vec<Row>, Error> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config("empty sweep table"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let col = |name: &str| -> Result<usize, Error> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::config(format!("sweep table is missing column '{name}'")))
    };
    let (c_n, c_l, c_w0u, c_wu) = (
        col("n_atoms")?,
        col("box_l")?,
        col("w0_unsat_mean")?,
        col("w_unsat_mean")?,
    );
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<&str, Error> {
            fields.get(i).copied().ok_or_else(|| {
                Error::config(format!("sweep table line {} is truncated", lineno + 2))
            })
        };
        let parse_f = |s: &str| -> Result<f64, Error> {
            s.parse::<f64>()
                .map_err(|_| Error::config(format!("bad number '{s}' in sweep table")))
        };
        rows.push(Row {
            n_atoms: get(c_n)?
                .parse()
                .map_err(|_| Error::config("bad n_atoms in sweep table"))?,
            box_l: parse_f(get(c_l)?)?,
            w0_unsat: parse_f(get(c_w0u)?)?,
            w_unsat: parse_f(get(c_wu)?)?,
        });
    }
    Ok(rows)
}

/// Fit w = w_u(1 + ξ σ_Ĥ) from a fom-sweep table and write fom_fit.json.
/// w_u is the measured t=0 width of the smallest-N row; rows whose widths
/// all saturated (NaN means) are excluded.
pub fn fit_from_csv(input: &Path, out: Option<&Path>) -> Result<(), Error> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", input.display())))?;
    let rows = parse_table(&text)?;
    let smallest = rows
        .iter()
        .filter(|r| r.w0_unsat.is_finite())
        .min_by_key(|r| r.n_atoms)
        .ok_or_else(|| Error::config("no usable t=0 widths in the sweep table"))?;
    let w_u = smallest.w0_unsat;
    let points: Vec<FomPoint> = rows
        .iter()
        .filter(|r| r.w_unsat.is_finite())
        .map(|r| FomPoint {
            n_atoms: r.n_atoms,
            box_l: r.box_l,
            w: r.w_unsat,
        })
        .collect();
    let fit = fit_fom(&points, w_u)?;

    let out_dir = out
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("fom_fit.json");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    serde_json::to_writer_pretty(&mut file, &fit)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(file)?;
    log::info!(
        "fitted xi = {:.4} (w_u = {:.4}); wrote {}",
        fit.xi,
        fit.w_u,
        path.display()
    );
    println!("xi = {:.6}", fit.xi);
    println!("w_u = {:.6}", fit.w_u);
    Ok(())
}
