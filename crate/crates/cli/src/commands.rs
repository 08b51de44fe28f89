use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use panoscaffold::fusion::{bidirectional_fuse_detailed, default_latent_size, overlap_agreement, FusionKernel};
use panoscaffold::io::{
    export_splat_ply, load_scaffold, load_trajectory, read_equirect_pfm, read_equirect_png, read_face_set, read_pfm,
    save_scaffold, save_trajectory, write_face_set, write_pfm, write_png, BitDepth, FaceFormat, RowOrder,
};
use panoscaffold::metrics::{align_sim3, depth_report, subsample_every, trajectory_report, DepthEvalMask, DepthReport};
use panoscaffold::motion::{make_trajectory, Motion};
use panoscaffold::scaffold::DepthConvention;
use panoscaffold::synth::{synth_pano, Scene};
use panoscaffold::{c2e, e2c, render, scaffold_from_pano, CameraIntrinsics, EquirectRaster, LiftParams, Raster};
use serde_json::json;

use crate::*;

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    panoscaffold::Error::InvalidArgument(msg.into()).into()
}

fn bit_depth(b: Bits) -> BitDepth {
    match b {
        Bits::Eight => BitDepth::Eight,
        Bits::Sixteen => BitDepth::Sixteen,
    }
}

fn is_pfm(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

fn read_pano(p: &Path) -> Result<EquirectRaster> {
    let r = if is_pfm(p) {
        read_equirect_pfm(p)
    } else {
        read_equirect_png(p)
    };
    r.with_context(|| format!("reading panorama {}", p.display()))
}

fn write_pano(p: &Path, r: &Raster, bits: Bits) -> Result<()> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    if is_pfm(p) {
        write_pfm(p, r, RowOrder::TopDown)?;
    } else {
        write_png(p, r, RowOrder::TopDown, bit_depth(bits))?;
    }
    Ok(())
}

fn print_json(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(p) = out {
        std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Pano2cube(a) => pano2cube(a),
        Command::Cube2pano(a) => cube2pano(a),
        Command::Scaffold(a) => scaffold(a),
        Command::Render(a) => render_traj(a),
        Command::EvalDepth(a) => eval_depth(a),
        Command::EvalTraj(a) => eval_traj(a),
        Command::Synth(a) => synth(a),
        Command::Fuse(a) => fuse(a),
        Command::Traj {
            command: TrajCommand::Make(a),
        } => traj_make(a),
    }
}

fn pano2cube(a: Pano2Cube) -> Result<()> {
    let pano = read_pano(&a.input)?;
    let size = a.face_size.unwrap_or(pano.width() / 2);
    let faces = e2c(&pano, size, a.fov)?;
    let format = match a.format {
        FaceFileFormat::Png => FaceFormat::Png(bit_depth(a.bits)),
        FaceFileFormat::Pfm => FaceFormat::Pfm,
    };
    write_face_set(&a.out, &faces, format)?;
    info!("wrote six {size}x{size} faces to {}", a.out.display());
    Ok(())
}

fn cube2pano(a: Cube2Pano) -> Result<()> {
    if a.width < 2 || a.width % 2 != 0 {
        return Err(invalid(format!("--width must be even and >= 2, got {}", a.width)));
    }
    let faces = read_face_set(&a.faces, a.fov)?;
    let pano = c2e(&faces, a.width, a.width / 2)?;
    write_pano(&a.out, pano.as_raster(), a.bits)
}

fn scaffold(a: ScaffoldArgs) -> Result<()> {
    let pano = read_pano(&a.pano)?;
    let depth = read_equirect_pfm(&a.depth).with_context(|| format!("reading depth {}", a.depth.display()))?;
    if depth.channels() != 1 {
        return Err(invalid(format!(
            "depth map must have one channel, got {}",
            depth.channels()
        )));
    }
    if pano.channels() != 3 {
        return Err(invalid(format!(
            "panorama must be RGB, got {} channels",
            pano.channels()
        )));
    }
    let params = LiftParams {
        opacity: a.opacity,
        scale_mult: a.scale_mult,
        depth_convention: match a.depth_kind {
            DepthKind::Ray => DepthConvention::RayDistance,
            DepthKind::Z => DepthConvention::ZDepth,
        },
        ..Default::default()
    };
    let size = a.face_size.unwrap_or(pano.width() / 2);
    let s = scaffold_from_pano(&pano, &depth, size, a.fov, &params)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_scaffold(&a.out, &s).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(ply) = &a.ply {
        let sink = BufWriter::new(File::create(ply).with_context(|| format!("creating {}", ply.display()))?);
        // the exporter itself logs a warning when opacities are clamped
        export_splat_ply(&s, sink)?;
    }
    println!("gaussians {}", s.len());
    println!("culled {}", s.culled_count().unwrap_or(0));
    Ok(())
}

fn frame_stem(index: u64, digits: usize) -> String {
    format!("frame_{index:0digits$}")
}

fn render_traj(a: RenderArgs) -> Result<()> {
    let s = load_scaffold(&a.scaffold).with_context(|| format!("reading {}", a.scaffold.display()))?;
    let traj = load_trajectory(&a.traj).with_context(|| format!("reading {}", a.traj.display()))?;
    if traj.is_empty() {
        return Err(invalid("trajectory has no frames"));
    }
    let base = traj.intrinsics;
    let (w, h) = (a.width.unwrap_or(base.width), a.height.unwrap_or(base.height));
    let k: CameraIntrinsics = if (w, h) == (base.width, base.height) {
        base
    } else {
        base.resized(w, h)?
    };
    std::fs::create_dir_all(&a.out)?;
    let last = traj.frames().last().map_or(0, |f| f.index);
    let digits = last.to_string().len().max(5);
    for f in traj.frames() {
        let view = render(&s, &f.pose, &k, w, h)?;
        let stem = frame_stem(f.index, digits);
        write_png(
            &a.out.join(format!("{stem}_color.png")),
            &view.color,
            RowOrder::BottomUp,
            bit_depth(a.bits),
        )?;
        write_png(
            &a.out.join(format!("{stem}_alpha.png")),
            &view.alpha,
            RowOrder::BottomUp,
            bit_depth(a.bits),
        )?;
        write_pfm(
            &a.out.join(format!("{stem}_depth.pfm")),
            &view.depth,
            RowOrder::BottomUp,
        )?;
    }
    println!("frames {}", traj.len());
    Ok(())
}

fn pfm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = entry?.path();
        if p.is_file() && is_pfm(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn eval_depth(a: EvalDepth) -> Result<()> {
    let pairs: Vec<(PathBuf, PathBuf)> = if a.pred.is_dir() {
        if !a.gt.is_dir() {
            return Err(invalid("--pred is a directory, so --gt must be one too"));
        }
        let preds = pfm_files(&a.pred)?;
        if preds.is_empty() {
            return Err(invalid(format!("no .pfm files in {}", a.pred.display())));
        }
        preds
            .into_iter()
            .map(|p| {
                let g = a.gt.join(p.file_name().unwrap());
                if g.is_file() {
                    Ok((p, g))
                } else {
                    Err(invalid(format!("no ground truth {} for {}", g.display(), p.display())))
                }
            })
            .collect::<Result<_>>()?
    } else {
        vec![(a.pred.clone(), a.gt.clone())]
    };
    let mut sum = [0.0; 5];
    for (p, g) in &pairs {
        let pred = read_pfm(p, RowOrder::TopDown).with_context(|| format!("reading {}", p.display()))?;
        let gt = read_pfm(g, RowOrder::TopDown).with_context(|| format!("reading {}", g.display()))?;
        let mask = DepthEvalMask::from_gt(&gt, a.min, a.max)?;
        let r = depth_report(&pred, &gt, &mask, a.lambda).with_context(|| format!("scoring {}", p.display()))?;
        for (s, v) in sum.iter_mut().zip([r.abs_rel, r.delta1, r.delta2, r.delta3, r.silog]) {
            *s += v;
        }
    }
    let n = pairs.len() as f64;
    info!("averaged over {} image(s)", pairs.len());
    let report = DepthReport {
        abs_rel: sum[0] / n,
        delta1: sum[1] / n,
        delta2: sum[2] / n,
        delta3: sum[3] / n,
        silog: sum[4] / n,
    };
    print_json(&report, a.out.as_deref())
}

fn eval_traj(a: EvalTraj) -> Result<()> {
    let est = load_trajectory(&a.est).with_context(|| format!("reading {}", a.est.display()))?;
    let gt = load_trajectory(&a.gt).with_context(|| format!("reading {}", a.gt.display()))?;
    let est = subsample_every(&est, a.every)?;
    let gt = subsample_every(&gt, a.every)?;
    let est = match a.align {
        Align::None => est,
        Align::Sim3 => align_sim3(&est, &gt)?,
    };
    print_json(&trajectory_report(&est, &gt)?, a.out.as_deref())
}

fn synth(a: Synth) -> Result<()> {
    let scene = match a.scene {
        SceneKind::Room => Scene::Room,
        SceneKind::Gradient => Scene::Gradient,
        SceneKind::Sphere => Scene::Sphere { radius: a.radius },
    };
    let pano = synth_pano(scene, a.size, a.seed)?;
    std::fs::create_dir_all(&a.out)?;
    write_png(
        &a.out.join("pano.png"),
        pano.color.as_raster(),
        RowOrder::TopDown,
        bit_depth(a.bits),
    )?;
    write_pfm(&a.out.join("depth.pfm"), pano.depth.as_raster(), RowOrder::TopDown)?;
    Ok(())
}

fn fuse(a: Fuse) -> Result<()> {
    let faces = read_face_set(&a.faces, None)?;
    let kernel = FusionKernel::from_name(&a.kernel)?;
    let size = match a.latent_width {
        None => default_latent_size(faces.face_size()),
        Some(w) if w >= 2 && w % 2 == 0 => (w, w / 2),
        Some(w) => return Err(invalid(format!("--latent-width must be even and >= 2, got {w}"))),
    };
    let out = bidirectional_fuse_detailed(&faces, &kernel, size)?;
    write_face_set(&a.out, &out.fused, FaceFormat::Pfm)?;
    write_pfm(&a.out.join("latent.pfm"), out.latent.as_raster(), RowOrder::TopDown)?;
    let agree = overlap_agreement(&out.residual, 64);
    let report = json!({
        "kernel": a.kernel,
        "latent_size": [size.0, size.1],
        "residual_overlap": {
            "samples": agree.samples,
            "max_abs_diff": agree.max_abs_diff,
            "mean_abs_diff": agree.mean_abs_diff,
        },
    });
    print_json(&report, None)
}

fn traj_make(a: TrajMake) -> Result<()> {
    let motion: Motion = a.motion.parse()?;
    let k = CameraIntrinsics::from_fov(a.width, a.height, a.fov)?;
    let t = make_trajectory(motion, a.frames, a.extent, k)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_trajectory(&a.out, &t)?;
    Ok(())
}
