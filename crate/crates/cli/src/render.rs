//! Re-render an exported field-map CSV as an ASCII graymap.

use std::io::Write;
use std::path::Path;

use colemit::Error;

/// Parse a field_map CSV (x fastest, y rows ascending) and write |E| as a
/// P2 graymap with the top row at the largest y.
pub fn render_csv(input: &Path, out: Option<&Path>) -> Result<(), Error> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", input.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config("empty field-map file"))?;
    if header != "x,y,Re_Ex,Im_Ex,Re_Ey,Im_Ey,Re_Ez,Im_Ez" {
        return Err(Error::config(format!(
            "unexpected field-map header: {header}"
        )));
    }

    let mut magnitudes: Vec<f64> = Vec::new();
    let mut first_y = None;
    let mut nx = 0usize;
    let mut first_row_done = false;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::config(format!("bad number '{s}' in field map")))
            })
            .collect::<Result<_, _>>()?;
        if fields.len() != 8 {
            return Err(Error::config("field-map row does not have 8 columns"));
        }
        let y = fields[1];
        if !first_row_done {
            match first_y {
                None => {
                    first_y = Some(y);
                    nx = 1;
                }
                Some(fy) if y == fy => nx += 1,
                Some(_) => first_row_done = true,
            }
        }
        let mag = (fields[2] * fields[2]
            + fields[3] * fields[3]
            + fields[4] * fields[4]
            + fields[5] * fields[5]
            + fields[6] * fields[6]
            + fields[7] * fields[7])
            .sqrt();
        magnitudes.push(mag);
    }
    if nx == 0 || magnitudes.len() % nx != 0 {
        return Err(Error::config("field map is not a complete grid"));
    }
    let ny = magnitudes.len() / nx;
    let max = magnitudes.iter().cloned().fold(0.0f64, f64::max);

    let out_path = out
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| input.with_extension("pgm"));
    let mut file = std::io::BufWriter::new(std::fs::File::create(&out_path)?);
    writeln!(file, "P2")?;
    writeln!(file, "{nx} {ny}")?;
    writeln!(file, "255")?;
    for iy in (0..ny).rev() {
        let row: Vec<String> = (0..nx)
            .map(|ix| {
                let v = if max > 0.0 {
                    (magnitudes[iy * nx + ix] / max * 255.0).round() as u32
                } else {
                    0
                };
                v.min(255).to_string()
            })
            .collect();
        writeln!(file, "{}", row.join(" "))?;
    }
    log::info!("wrote {}", out_path.display());
    Ok(())
}
