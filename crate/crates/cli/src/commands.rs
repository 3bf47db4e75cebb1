use moire_core::agmon::{tunneling_action, AgmonGrid};
use moire_core::blochpw::{bands_on, fiber_eigs, PlaneWaveBasis};
use moire_core::harmonic::{compare, levels_up_to, numeric_coeffs, paper_coeffs, predicted_e, HarmonicData, HarmonicMode};
use moire_core::lattice::{kpath, KGrid};
use moire_core::potential::{fourier_check, fourier_table, landscape, mode_discrepancy, wells_audit, AUDIT_GRID};
use moire_core::scan::{band_widths, DEFAULT_H_LIST};
use moire_core::singlewell::{richardson_e1, well_eigs, WellProblem};
use moire_core::topology::{berry_links, oddness_of};
use moire_core::{build_lattice, EigMode, Lattice, ModelParams, Vec2};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{fmt_f64, to_json, Csv};
use crate::{AppError, Artifacts, Command};

type Out = Result<Artifacts, AppError>;

fn provenance(cmd: Command, cfg: &RunConfig, p: &ModelParams, grid: Value, gcut: Option<f64>) -> Value {
    json!({
        "command": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "preset": cfg.preset,
        "params": p,
        "grid": grid,
        "gcut": gcut,
    })
}

fn document(prov: Value, result: Value) -> String {
    to_json(&json!({ "provenance": prov, "result": result }))
}

fn basis_for(cfg: &RunConfig, h: f64, lat: &Lattice) -> Result<PlaneWaveBasis, AppError> {
    let gcut = cfg.gcut.unwrap_or_else(|| PlaneWaveBasis::auto_gcut(h, lat));
    Ok(PlaneWaveBasis::new(gcut, lat)?)
}

fn header(fixed: &[&str], prefix: &str, n: usize) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).chain((1..=n).map(|i| format!("{prefix}{i}"))).collect()
}

pub fn run(cmd: Command, cfg: &RunConfig, tables: bool) -> Out {
    let p = cfg.params()?;
    let lat = build_lattice();
    match cmd {
        Command::Landscape => landscape_cmd(cmd, cfg, &p, &lat),
        Command::Bands => bands_cmd(cmd, cfg, &p, &lat),
        Command::Chern => chern_cmd(cmd, cfg, &p, &lat),
        Command::Agmon => agmon_cmd(cmd, cfg, &p, &lat, tables),
        Command::Scan => scan_cmd(cmd, cfg, &p, &lat),
        Command::Harmonic => harmonic_cmd(cmd, cfg, &p, &lat),
        Command::Wells => wells_cmd(cmd, cfg, &p, &lat),
        Command::Well => well_cmd(cmd, cfg, &p),
        Command::FourierCheck => fourier_cmd(cmd, cfg, &p, &lat),
    }
}

fn landscape_cmd(cmd: Command, cfg: &RunConfig, p: &ModelParams, lat: &Lattice) -> Out {
    let n = cfg.landscape_n.unwrap_or(64);
    let mode = cfg.mode.unwrap_or(EigMode::Exact);
    let pts = landscape(p, lat, n, mode)?;
    let mut csv = Csv::new(&header(&["i", "j", "x", "y", "lambda_minus", "lambda_plus"], "", 0));
    for (t, q) in pts.iter().enumerate() {
        csv.row(&[
            (t / n).to_string(),
            (t % n).to_string(),
            fmt_f64(q.x.x),
            fmt_f64(q.x.y),
            fmt_f64(q.lambda_minus),
            fmt_f64(q.lambda_plus),
        ]);
    }
    let lm = pts.iter().map(|q| q.lambda_minus);
    let min = lm.clone().fold(f64::INFINITY, f64::min);
    let max = lm.fold(f64::NEG_INFINITY, f64::max);
    let gap = pts.iter().map(|q| q.lambda_plus - q.lambda_minus).fold(f64::INFINITY, f64::min);
    let discrepancy = if p.alpha == 1.0 { Some(mode_discrepancy(p)?) } else { None };
    let result = json!({
        "mode": mode,
        "min_lambda_minus": min,
        "max_lambda_minus": max,
        "min_gap": gap,
        "mode_discrepancy_at_origin": discrepancy,
    });
    let prov = provenance(cmd, cfg, p, json!({ "cell_n": n }), None);
    Ok(Artifacts { json: document(prov, result), tables: vec![("landscape.csv".into(), csv.into_string())] })
}

fn bands_cmd(cmd: Command, cfg: &RunConfig, p: &ModelParams, lat: &Lattice) -> Out {
    let labels = cfg.kpath.clone().unwrap_or_else(|| ["G", "K", "M", "G"].map(String::from).to_vec());
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let path = kpath(&refs, cfg.kpath_n.unwrap_or(30), lat)?;
    let nb = cfg.nbands.unwrap_or(6);
    let basis = basis_for(cfg, p.h, lat)?;
    let bs = bands_on(&path.points, p, &basis, nb)?;
    let mut csv = Csv::new(&header(&["index", "arclength", "kx", "ky", "label"], "E", nb));
    for (t, k) in path.points.iter().enumerate() {
        let label = path.vertex_index.iter().position(|&v| v == t).map(|i| path.labels[i].tag()).unwrap_or("");
        let mut row = vec![t.to_string(), fmt_f64(path.arclength[t]), fmt_f64(k.x), fmt_f64(k.y), label.to_string()];
        row.extend(bs.energies[t].iter().map(|&e| fmt_f64(e)));
        csv.row(&row);
    }
    let max_res = bs.residuals.iter().flatten().fold(0.0f64, |m, &r| m.max(r));
    let widths: Vec<f64> = (0..nb).map(|i| bs.width(i)).collect();
    let result = json!({
        "labels": path.labels,
        "vertex_index": path.vertex_index,
        "nbands": nb,
        "dim": bs.dim,
        "widths_along_path": widths,
        "max_residual": max_res,
    });
    let prov = provenance(cmd, cfg, p, json!({ "kpath_points": path.len() }), Some(basis.gcut));
    Ok(Artifacts { json: document(prov, result), tables: vec![("bands.csv".into(), csv.into_string())] })
}

fn chern_cmd(cmd: Command, cfg: &RunConfig, p: &ModelParams, lat: &Lattice) -> Out {
    let n = cfg.kgrid.unwrap_or(18);
    let nb = cfg.nbands.unwrap_or(1);
    let grid = KGrid::new(n, n, lat)?;
    let basis = basis_for(cfg, p.h, lat)?;
    let f = berry_links(p, &grid, nb, &basis)?;
    let odd = if p.u == 0.0 { Some(oddness_of(&f)) } else { None };
    let mut csv = Csv::new(&header(&["i", "j", "flux"], "", 0));
    for i in 0..n {
        for j in 0..n {
            csv.row(&[i.to_string(), j.to_string(), fmt_f64(f.flux_at(i, j))]);
        }
    }
    let result = json!({
        "nbands": nb,
        "chern": f.chern,
        "quantization_defect": f.quantization_defect,
        "min_gap": f.min_gap,
        "max_abs_flux": f.max_abs_flux(),
        "oddness": odd,
    });
    let prov = provenance(cmd, cfg, p, json!({ "kgrid": [n, n] }), Some(basis.gcut));
    Ok(Artifacts { json: document(prov, result), tables: vec![("chern_flux.csv".into(), csv.into_string())] })
}

fn agmon_cmd(cmd: Command, cfg: &RunConfig, p: &ModelParams, lat: &Lattice, tables: bool) -> Out {
    let d = AgmonGrid::default();
    let grid = AgmonGrid {
        n_per_unit: cfg.agmon_n.unwrap_or(d.n_per_unit),
        stencil_radius: cfg.stencil_radius.unwrap_or(d.stencil_radius),
        ..d
    };
    grid.validate()?;
    let f = tunneling_action(p, cfg.energy, &grid, lat)?;
    let mut out = Vec::new();
    if tables && cfg.rho_csv.unwrap_or(false) {
        let m = grid.side();
        let mut csv = Csv::new(&header(&["x", "y", "weight", "rho"], "", 0));
        for t in 0..m * m {
            let x = grid.node(t / m, t % m);
            csv.row(&[fmt_f64(x.x), fmt_f64(x.y), fmt_f64(f.weight[t]), fmt_f64(f.rho[t])]);
        }
        out.push(("agmon_rho.csv".into(), csv.into_string()));
    }
    let result = json!({
        "E": f.energy,
        "S0": f.s0,
        "actions": f.actions,
        "action_spread": f.action_spread(),
        "rho_max": f.rho.iter().cloned().fold(0.0, f64::max),
    });
    let prov = provenance(cmd, cfg, p, serde_json::to_value(grid).expect("grid serialises"), None);
    Ok(Artifacts { json: document(prov, result), tables: out })
}

fn scan_cmd(cmd: Command, cfg: &RunConfig, p: &ModelParams, lat: &Lattice) -> Out {
    let hs = cfg.h_list.clone().unwrap_or_else(|| DEFAULT_H_LIST.to_vec());
    let n = cfg.kgrid.unwrap_or(6);
    let nb = cfg.nbands.unwrap_or(1);
    let grid = KGrid::new(n, n, lat)?;
    let hmin = hs.iter().cloned().fold(f64::INFINITY, f64::min);
    let basis = basis_for(cfg, hmin, lat)?;
    let mut r = band_widths(p, &hs, &grid, nb, Some(&basis), lat)?;
    let agmon = tunneling_action(p, None, &AgmonGrid::default(), lat)?;
    r.s0 = Some(agmon.s0);
    let mut ratios = Vec::with_capacity(nb);
    for band in 0..nb {
        let ratio = r.fits[band].map(|f| f.b / agmon.s0);
        if r.scale_consistent(band) == Some(false) {
            r.warnings.push(format!("band {}: b/S0 = {} outside [0.3, 2.2]", band + 1, fmt_f64(ratio.unwrap())));
        }
        ratios.push(ratio);
    }
    let mut csv = Csv::new(&header(&["h"], "width_", nb));
    for (h, row) in r.h_list.iter().zip(&r.widths) {
        let mut cells = vec![fmt_f64(*h)];
        cells.extend(row.iter().map(|&w| fmt_f64(w)));
        csv.row(&cells);
    }
    let result = json!({
        "h_list": r.h_list,
        "widths": r.widths,
        "fits": r.fits,
        "S0": r.s0,
        "b_over_S0": ratios,
        "convergence_delta": r.convergence_delta,
        "warnings": r.warnings,
    });
    let prov = provenance(cmd, cfg, p, json!({ "kgrid": [n, n], "agmon": AgmonGrid::default() }), Some(basis.gcut));
    Ok(Artifacts { json: document(prov, result), tables: vec![("scan.csv".into(), csv.into_string())] })
}

fn harmonic_cmd(cmd: Command, cfg: &RunConfig, p: &ModelParams, lat: &Lattice) -> Out {
    let hd: HarmonicData = match cfg.harmonic_mode.unwrap_or(HarmonicMode::Numeric) {
        HarmonicMode::Paper => paper_coeffs(p)?,
        HarmonicMode::Numeric => numeric_coeffs(p, lat)?,
    };
    let nl = cfg.nlevels.unwrap_or(3);
    let levels = levels_up_to(&hd, nl);
    let predicted: Vec<f64> = (1..=nl).map(|n| predicted_e(&hd, p.h, n)).collect();
    let mut comparisons = Vec::new();
    let mut gcuts = Vec::new();
    if cfg.compare.unwrap_or(true) {
        let hs = cfg.h_list.clone().unwrap_or_else(|| vec![p.h]);
        for h in hs {
            let ph = p.with_h(h);
            let basis = basis_for(cfg, h, lat)?;
            let table = fourier_table(&ph, lat);
            let e = fiber_eigs(&ph, Vec2::ZERO, &basis, &table, nl)?;
            comparisons.push(compare(&e.values, &hd, h));
            gcuts.push(basis.gcut);
        }
    }
    let result = json!({
        "coefficients": hd,
        "levels": levels,
        "predicted": predicted,
        "comparisons": comparisons,
        "comparison_gcuts": gcuts,
    });
    let prov = provenance(cmd, cfg, p, json!({ "nlevels": nl }), cfg.gcut);
    Ok(Artifacts { json: document(prov, result), tables: vec![] })
}

fn wells_cmd(cmd: Command, cfg: &RunConfig, p: &ModelParams, lat: &Lattice) -> Out {
    let n = cfg.audit_grid.unwrap_or(AUDIT_GRID);
    let mode = cfg.mode.unwrap_or(EigMode::Exact);
    let a = wells_audit(p, lat, n, mode)?;
    let mut result = serde_json::to_value(&a).expect("audit serialises");
    result["mode"] = json!(mode);
    let prov = provenance(cmd, cfg, p, json!({ "audit_grid": n }), None);
    Ok(Artifacts { json: document(prov, result), tables: vec![] })
}

fn well_cmd(cmd: Command, cfg: &RunConfig, p: &ModelParams) -> Out {
    let mut wp = WellProblem::new(*p);
    if let Some(n) = cfg.well_n {
        wp.n = n;
    }
    if let Some(l) = cfg.well_half_width {
        wp.half_width = l;
    }
    if let Some(s) = cfg.well_stencil {
        wp.stencil = s;
    }
    wp.validate()?;
    let spec = well_eigs(&wp, cfg.nev.unwrap_or(5))?;
    let rich = if cfg.richardson.unwrap_or(false) { Some(richardson_e1(&wp)?) } else { None };
    let result = json!({ "spectrum": spec, "richardson": rich });
    let grid = json!({ "n": wp.n, "half_width": wp.half_width, "spacing": wp.spacing(), "stencil": wp.stencil, "cutoff": wp.chi });
    let prov = provenance(cmd, cfg, p, grid, None);
    Ok(Artifacts { json: document(prov, result), tables: vec![] })
}

fn fourier_cmd(cmd: Command, cfg: &RunConfig, p: &ModelParams, lat: &Lattice) -> Out {
    let n = cfg.fourier_grid.unwrap_or(16);
    let c = fourier_check(p, lat, n, cfg.fourier_points.unwrap_or(100), cfg.seed.unwrap_or(0))?;
    let table = fourier_table(p, lat);
    let entries: Vec<Value> = table
        .entries
        .iter()
        .map(|(&(m, l), c)| {
            let flat: Vec<[f64; 2]> = c.iter().flatten().map(|z| [z.re, z.im]).collect();
            json!({ "m": m, "n": l, "coefficients": flat })
        })
        .collect();
    let result = json!({ "check": c, "table": entries });
    let prov = provenance(cmd, cfg, p, json!({ "sample_grid": [n, n] }), None);
    Ok(Artifacts { json: document(prov, result), tables: vec![] })
}
