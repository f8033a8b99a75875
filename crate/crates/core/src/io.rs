//! File formats: state and density JSON, Wigner grid CSV with a JSON twin.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::AngleGrid;
use crate::phase_space::WignerGrid;
use crate::states::{DensityMatrix, OamWindow, PureState};

pub const STATE_FORMAT: &str = "cylwig-state-v1";
pub const DENSITY_FORMAT: &str = "cylwig-density-v1";
pub const WIGNER_FORMAT: &str = "cylwig-wigner-v1";

#[derive(Serialize, Deserialize)]
struct StateFile {
    format: String,
    l_min: i64,
    coefficients: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    norm: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct DensityFile {
    format: String,
    l_min: i64,
    elements: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct WignerFile {
    format: String,
    l_lo: i64,
    l_hi: i64,
    n_phi: usize,
    source_l_min: i64,
    source_l_max: i64,
    pad: usize,
    /// One array per ℓ row, ascending.
    values: Vec<Vec<f64>>,
}

/// A parsed state or density file.
#[derive(Debug, Clone)]
pub enum StateInput {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl StateInput {
    pub fn density(&self) -> DensityMatrix {
        match self {
            StateInput::Pure(s) => crate::states::to_density(s),
            StateInput::Mixed(d) => d.clone(),
        }
    }
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn complex([re, im]: [f64; 2]) -> Complex64 {
    Complex64::new(re, im)
}

fn check_format(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::format(format!("expected format {expected}, found {found}")));
    }
    Ok(())
}

fn window_of(l_min: i64, size: usize) -> Result<OamWindow> {
    if size == 0 {
        return Err(Error::format("empty coefficient list"));
    }
    OamWindow::new(l_min, l_min + size as i64 - 1)
}

pub fn state_to_json(state: &PureState) -> String {
    let file = StateFile {
        format: STATE_FORMAT.into(),
        l_min: state.window().l_min(),
        coefficients: state.coefficients().iter().copied().map(pair).collect(),
        norm: Some(state.norm_sqr().sqrt()),
    };
    serde_json::to_string(&file).expect("plain data serializes") + "\n"
}

pub fn state_from_json(text: &str) -> Result<PureState> {
    let file: StateFile = serde_json::from_str(text)?;
    check_format(&file.format, STATE_FORMAT)?;
    let window = window_of(file.l_min, file.coefficients.len())?;
    PureState::new(window, file.coefficients.into_iter().map(complex).collect())
}

pub fn density_to_json(rho: &DensityMatrix) -> String {
    let m = rho.matrix();
    let file = DensityFile {
        format: DENSITY_FORMAT.into(),
        l_min: rho.window().l_min(),
        elements: (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| pair(m[(i, j)])).collect())
            .collect(),
    };
    serde_json::to_string(&file).expect("plain data serializes") + "\n"
}

pub fn density_from_json(text: &str) -> Result<DensityMatrix> {
    let file: DensityFile = serde_json::from_str(text)?;
    check_format(&file.format, DENSITY_FORMAT)?;
    let n = file.elements.len();
    if file.elements.iter().any(|r| r.len() != n) {
        return Err(Error::format("density elements must form a square matrix"));
    }
    let window = window_of(file.l_min, n)?;
    let m = DMatrix::from_fn(n, n, |i, j| complex(file.elements[i][j]));
    DensityMatrix::new(window, m)
}

/// Reads either file kind, dispatching on the `format` field.
pub fn read_state_input(text: &str) -> Result<StateInput> {
    #[derive(Deserialize)]
    struct Probe {
        format: String,
    }
    let probe: Probe = serde_json::from_str(text)?;
    match probe.format.as_str() {
        STATE_FORMAT => state_from_json(text).map(StateInput::Pure),
        DENSITY_FORMAT => density_from_json(text).map(StateInput::Mixed),
        other => Err(Error::format(format!("unknown format {other}"))),
    }
}

pub fn wigner_to_csv(w: &WignerGrid) -> String {
    let mut out = String::with_capacity(64 * w.values().len() + 256);
    out.push_str(&format!("# format={WIGNER_FORMAT}\n"));
    out.push_str(&format!(
        "# l_lo={} l_hi={} n_phi={} source_l_min={} source_l_max={} pad={}\n",
        w.l_lo(),
        w.l_hi(),
        w.grid().n_phi(),
        w.source().l_min(),
        w.source().l_max(),
        w.pad()
    ));
    out.push_str("l,phi_index,phi,value\n");
    for (l, j, phi, v) in w.points() {
        out.push_str(&format!("{l},{j},{phi:.16e},{v:.16e}\n"));
    }
    out
}

pub fn wigner_to_json(w: &WignerGrid) -> String {
    let n = w.grid().n_phi();
    let file = WignerFile {
        format: WIGNER_FORMAT.into(),
        l_lo: w.l_lo(),
        l_hi: w.l_hi(),
        n_phi: n,
        source_l_min: w.source().l_min(),
        source_l_max: w.source().l_max(),
        pad: w.pad(),
        values: w.values().chunks(n).map(<[f64]>::to_vec).collect(),
    };
    serde_json::to_string(&file).expect("plain data serializes") + "\n"
}

/// Parses a grid from CSV or from its JSON twin.
pub fn read_wigner(text: &str) -> Result<WignerGrid> {
    if text.trim_start().starts_with('{') {
        wigner_from_json(text)
    } else {
        wigner_from_csv(text)
    }
}

struct Header {
    l_lo: i64,
    l_hi: i64,
    n_phi: usize,
    source_l_min: i64,
    source_l_max: i64,
    pad: usize,
}

impl Header {
    fn build(&self, values: Vec<f64>) -> Result<WignerGrid> {
        let source = OamWindow::new(self.source_l_min, self.source_l_max)?;
        if self.l_lo != self.source_l_min - self.pad as i64 || self.l_hi != self.source_l_max + self.pad as i64 {
            return Err(Error::format(format!(
                "rows {}:{} do not match source window {source} padded by {}",
                self.l_lo, self.l_hi, self.pad
            )));
        }
        WignerGrid::new(source, self.pad, AngleGrid::new(self.n_phi)?, values)
    }
}

fn wigner_from_json(text: &str) -> Result<WignerGrid> {
    let file: WignerFile = serde_json::from_str(text)?;
    check_format(&file.format, WIGNER_FORMAT)?;
    if file.values.iter().any(|r| r.len() != file.n_phi) {
        return Err(Error::format(format!("every row must hold {} values", file.n_phi)));
    }
    let header = Header {
        l_lo: file.l_lo,
        l_hi: file.l_hi,
        n_phi: file.n_phi,
        source_l_min: file.source_l_min,
        source_l_max: file.source_l_max,
        pad: file.pad,
    };
    header.build(file.values.into_iter().flatten().collect())
}

fn parse<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::format(format!("line {line}: cannot parse {what} from {s:?}")))
}

fn wigner_from_csv(text: &str) -> Result<WignerGrid> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| Error::format("empty grid file"))?;
    if first.trim() != format!("# format={WIGNER_FORMAT}") {
        return Err(Error::format(format!("line 1: expected '# format={WIGNER_FORMAT}'")));
    }
    let (_, second) = lines.next().ok_or_else(|| Error::format("missing grid header"))?;
    let fields = second
        .strip_prefix('#')
        .ok_or_else(|| Error::format("line 2: expected a '#' header"))?;
    let mut get = std::collections::HashMap::new();
    for kv in fields.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::format(format!("line 2: malformed field {kv:?}")))?;
        get.insert(k, v);
    }
    let field = |k: &str| {
        get.get(k)
            .copied()
            .ok_or_else(|| Error::format(format!("line 2: missing {k}")))
    };
    let header = Header {
        l_lo: parse(field("l_lo")?, "l_lo", 2)?,
        l_hi: parse(field("l_hi")?, "l_hi", 2)?,
        n_phi: parse(field("n_phi")?, "n_phi", 2)?,
        source_l_min: parse(field("source_l_min")?, "source_l_min", 2)?,
        source_l_max: parse(field("source_l_max")?, "source_l_max", 2)?,
        pad: parse(field("pad")?, "pad", 2)?,
    };
    if header.l_hi < header.l_lo {
        return Err(Error::format("line 2: l_hi below l_lo"));
    }
    let (_, columns) = lines.next().ok_or_else(|| Error::format("missing column header"))?;
    if columns.trim() != "l,phi_index,phi,value" {
        return Err(Error::format("line 3: expected column header l,phi_index,phi,value"));
    }
    let rows = (header.l_hi - header.l_lo + 1) as usize;
    let mut values = Vec::with_capacity(rows * header.n_phi);
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::format(format!("line {no}: expected 4 fields")));
        }
        let k = values.len();
        let (expect_l, expect_j) = (header.l_lo + (k / header.n_phi.max(1)) as i64, k % header.n_phi.max(1));
        let l: i64 = parse(parts[0], "l", no)?;
        let j: usize = parse(parts[1], "phi_index", no)?;
        if l != expect_l || j != expect_j {
            return Err(Error::format(format!(
                "line {no}: expected point ({expect_l}, {expect_j}), found ({l}, {j})"
            )));
        }
        let _phi: f64 = parse(parts[2], "phi", no)?;
        values.push(parse(parts[3], "value", no)?);
    }
    header.build(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::wigner_from_oam;
    use crate::states::{mix, oam_eigenstate, random_pure_state, to_density};

    fn w(a: i64, b: i64) -> OamWindow {
        OamWindow::new(a, b).unwrap()
    }

    #[test]
    fn state_round_trip_is_lossless() {
        let s = random_pure_state(w(-3, 2), 9);
        let back = state_from_json(&state_to_json(&s)).unwrap();
        assert_eq!(back, s);
        assert!(matches!(read_state_input(&state_to_json(&s)).unwrap(), StateInput::Pure(_)));
    }

    #[test]
    fn density_round_trip_is_lossless() {
        let rho = mix(&[(0.3, random_pure_state(w(-2, 2), 1)), (0.7, random_pure_state(w(-2, 2), 2))]).unwrap();
        let back = density_from_json(&density_to_json(&rho)).unwrap();
        assert_eq!(back.matrix(), rho.matrix());
        assert!(matches!(read_state_input(&density_to_json(&rho)).unwrap(), StateInput::Mixed(_)));
    }

    #[test]
    fn wrong_format_tag() {
        let text = state_to_json(&oam_eigenstate(0, w(0, 0)).unwrap()).replace(STATE_FORMAT, "other");
        assert!(matches!(state_from_json(&text), Err(Error::Format(_))));
        assert!(read_state_input("{}").is_err());
    }

    #[test]
    fn wigner_csv_and_json_round_trip() {
        let rho = to_density(&random_pure_state(w(-2, 1), 3));
        let g = wigner_from_oam(&rho, 3, AngleGrid::for_span(3)).unwrap().without_overflow();
        let csv = wigner_to_csv(&g);
        assert!(csv.starts_with("# format=cylwig-wigner-v1\n# l_lo=-5 l_hi=4 n_phi=16 source_l_min=-2 source_l_max=1 pad=3\nl,phi_index,phi,value\n"));
        assert_eq!(read_wigner(&csv).unwrap(), g);
        assert_eq!(read_wigner(&wigner_to_json(&g)).unwrap(), g);
    }

    #[test]
    fn wigner_csv_rejects_bad_order() {
        let g = wigner_from_oam(&to_density(&oam_eigenstate(0, w(0, 0)).unwrap()), 1, AngleGrid::new(4).unwrap()).unwrap();
        let csv = wigner_to_csv(&g);
        let mut lines: Vec<&str> = csv.lines().collect();
        lines.swap(3, 4);
        assert!(read_wigner(&lines.join("\n")).is_err());
        let truncated: String = csv.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(read_wigner(&truncated).is_err());
    }
}
