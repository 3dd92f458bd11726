use crate::raster::{crop, reflect_pad, Image, Rect, Sample, CHANNELS};

use super::feather::{FeatherCanvas, Ramp};
use super::{BlockGrid, PackingCounts, PipelineConfig, TilerError};

/// A block window into the expanded image. Pixels are copied only when the
/// block is packed into a sub-image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockView {
    pub ordinal: usize,
    pub row: usize,
    pub col: usize,
    /// Window origin in expanded coordinates.
    pub x0: usize,
    pub y0: usize,
}

/// A transformed block with its own pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub ordinal: usize,
    pub row: usize,
    pub col: usize,
    pub filler: bool,
    pub pixels: Image,
}

/// Reflection-pads `image` so that the original sits at
/// `(w_padding, w_padding)` and both sides become whole multiples of
/// `w_basic` plus `2 * w_padding`.
pub fn expand<T: Sample>(image: &Image<T>, cfg: &PipelineConfig) -> Result<Image<T>, TilerError> {
    cfg.validate_geometry()?;
    let grid = BlockGrid::new(image.width(), image.height(), cfg);
    let p = cfg.w_padding;
    let right = grid.expanded_width() - image.width() - p;
    let bottom = grid.expanded_height() - image.height() - p;
    Ok(reflect_pad(image, p, p, right, bottom)?)
}

/// Grid implied by the size of an expanded image.
fn grid_of_expanded(width: usize, height: usize, cfg: &PipelineConfig) -> Result<BlockGrid, TilerError> {
    let mismatch = || TilerError::GridMismatch {
        width,
        height,
        w_basic: cfg.w_basic,
        w_padding: cfg.w_padding,
    };
    let inner_w = width.checked_sub(2 * cfg.w_padding).ok_or_else(mismatch)?;
    let inner_h = height.checked_sub(2 * cfg.w_padding).ok_or_else(mismatch)?;
    if inner_w == 0 || inner_h == 0 || inner_w % cfg.w_basic != 0 || inner_h % cfg.w_basic != 0 {
        return Err(mismatch());
    }
    Ok(BlockGrid {
        cols: inner_w / cfg.w_basic,
        rows: inner_h / cfg.w_basic,
        w_basic: cfg.w_basic,
        w_padding: cfg.w_padding,
    })
}

/// Slides a `w_block` window with stride `w_basic` over the expanded image,
/// numbering windows in row-major order.
pub fn cut<T: Sample>(expanded: &Image<T>, cfg: &PipelineConfig) -> Result<Vec<BlockView>, TilerError> {
    cfg.validate_geometry()?;
    let grid = grid_of_expanded(expanded.width(), expanded.height(), cfg)?;
    let mut blocks = Vec::with_capacity(grid.n_total());
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let (x0, y0) = grid.window_origin(row, col);
            blocks.push(BlockView {
                ordinal: blocks.len(),
                row,
                col,
                x0,
                y0,
            });
        }
    }
    Ok(blocks)
}

/// One packed position inside a sub-image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub block: BlockView,
    pub filler: bool,
}

/// How shuffled blocks are packed into square sub-images.
///
/// Blocks are taken in list order, `grid_side²` at a time, and laid out
/// row-major. Empty slots of the last sub-image are filled with copies taken
/// cyclically from the start of the list; those copies are dropped at recut.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubImagePlan {
    pub counts: PackingCounts,
    pub w_block: usize,
    pub n_total: usize,
    pub placement: Vec<Vec<Slot>>,
}

impl SubImagePlan {
    pub fn new(order: &[BlockView], cfg: &PipelineConfig) -> Result<Self, TilerError> {
        let n_total = order.len();
        let counts = PackingCounts::new(n_total, cfg)?;
        if n_total == 0 {
            return Err(TilerError::InconsistentBlocks("no blocks to pack".into()));
        }
        let n_block = counts.n_block;
        let placement = (0..counts.n_subimg)
            .map(|k| {
                (0..n_block)
                    .map(|slot| {
                        let i = k * n_block + slot;
                        if i < n_total {
                            Slot {
                                block: order[i],
                                filler: false,
                            }
                        } else {
                            Slot {
                                block: order[(i - n_total) % n_total],
                                filler: true,
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            counts,
            w_block: cfg.w_block(),
            n_total,
            placement,
        })
    }

    pub fn n_subimg(&self) -> usize {
        self.placement.len()
    }

    pub fn side(&self) -> usize {
        self.counts.subimage_side
    }

    /// Top-left corner of slot `index` inside its sub-image.
    #[inline]
    pub fn slot_origin(&self, index: usize) -> (usize, usize) {
        let g = self.counts.grid_side;
        ((index % g) * self.w_block, (index / g) * self.w_block)
    }

    /// Copies the blocks of sub-image `k` out of the expanded image.
    pub fn render<T: Sample>(&self, k: usize, expanded: &Image<T>) -> Image {
        let side = self.side();
        let wb = self.w_block;
        let mut data = vec![0f32; side * side * CHANNELS];
        for (index, slot) in self.placement[k].iter().enumerate() {
            let (sx, sy) = self.slot_origin(index);
            for dy in 0..wb {
                let src = expanded.row(slot.block.y0 + dy);
                let src = &src[slot.block.x0 * CHANNELS..(slot.block.x0 + wb) * CHANNELS];
                let start = ((sy + dy) * side + sx) * CHANNELS;
                for (d, s) in data[start..start + wb * CHANNELS].iter_mut().zip(src) {
                    *d = s.to_f32();
                }
            }
        }
        Image::from_vec(side, side, data).expect("sub-image side is non-zero")
    }
}

/// Packed sub-images together with their placement map.
#[derive(Clone, Debug)]
pub struct SubImageBatch {
    pub plan: SubImagePlan,
    pub subimages: Vec<Image>,
}

/// Packs shuffled block windows into sub-images, materialising all of them.
pub fn concatenate<T: Sample>(
    blocks: &[BlockView],
    expanded: &Image<T>,
    cfg: &PipelineConfig,
) -> Result<SubImageBatch, TilerError> {
    let plan = SubImagePlan::new(blocks, cfg)?;
    let subimages = (0..plan.n_subimg()).map(|k| plan.render(k, expanded)).collect();
    Ok(SubImageBatch { plan, subimages })
}

/// Cuts sub-image `k` back into blocks, trims each by `cfg.trim` and drops
/// fillers.
pub fn recut_subimage(
    plan: &SubImagePlan,
    k: usize,
    subimage: &Image,
    cfg: &PipelineConfig,
) -> Result<Vec<Block>, TilerError> {
    let side = plan.side();
    if subimage.width() != side || subimage.height() != side {
        return Err(TilerError::SubImageSize {
            index: k,
            width: subimage.width(),
            height: subimage.height(),
            side,
        });
    }
    let trimmed = plan.w_block - 2 * cfg.trim;
    plan.placement[k]
        .iter()
        .enumerate()
        .filter(|(_, slot)| !slot.filler)
        .map(|(index, slot)| {
            let (sx, sy) = plan.slot_origin(index);
            let rect = Rect::new(sx + cfg.trim, sy + cfg.trim, trimmed, trimmed);
            Ok(Block {
                ordinal: slot.block.ordinal,
                row: slot.block.row,
                col: slot.block.col,
                filler: false,
                pixels: crop(subimage, rect)?,
            })
        })
        .collect()
}

/// Recuts every sub-image of a (transformed) batch.
pub fn recut(batch: &SubImageBatch, cfg: &PipelineConfig) -> Result<Vec<Block>, TilerError> {
    if batch.subimages.len() != batch.plan.n_subimg() {
        return Err(TilerError::InconsistentBlocks(format!(
            "{} sub-images for a plan of {}",
            batch.subimages.len(),
            batch.plan.n_subimg()
        )));
    }
    let mut out = Vec::with_capacity(batch.plan.n_total);
    for (k, sub) in batch.subimages.iter().enumerate() {
        out.extend(recut_subimage(&batch.plan, k, sub, cfg)?);
    }
    Ok(out)
}

/// Orders blocks by ordinal. Duplicate ordinals are an error.
pub fn sort_blocks(mut blocks: Vec<Block>) -> Result<Vec<Block>, TilerError> {
    blocks.sort_by_key(|b| b.ordinal);
    if let Some(w) = blocks.windows(2).find(|w| w[0].ordinal == w[1].ordinal) {
        return Err(TilerError::DuplicateOrdinal(w[0].ordinal));
    }
    Ok(blocks)
}

/// Incremental form of [`restore`]: trimmed blocks are feathered in as they
/// arrive, in any order.
pub struct Restorer {
    grid: BlockGrid,
    side: usize,
    ramp: Ramp,
    shift: isize,
    seen: Vec<bool>,
    canvas: FeatherCanvas,
}

impl Restorer {
    pub fn new(cfg: &PipelineConfig, original_w: usize, original_h: usize) -> Result<Self, TilerError> {
        cfg.validate_geometry()?;
        let grid = BlockGrid::new(original_w, original_h, cfg);
        let side = cfg.trimmed_side();
        Ok(Self {
            seen: vec![false; grid.n_total()],
            grid,
            side,
            ramp: Ramp::new(side, cfg.overlap_span()),
            // trimmed block origin in expanded coordinates, shifted by the margin
            shift: cfg.trim as isize - cfg.w_padding as isize,
            canvas: FeatherCanvas::new(original_w, original_h),
        })
    }

    pub fn add(&mut self, block: &Block) -> Result<(), TilerError> {
        let side = self.side;
        if block.pixels.width() != side || block.pixels.height() != side {
            return Err(TilerError::InconsistentBlocks(format!(
                "block {} is {}x{}, expected {side}x{side}",
                block.ordinal,
                block.pixels.width(),
                block.pixels.height()
            )));
        }
        let (row, col) = self.grid.position(block.ordinal);
        match self.seen.get_mut(block.ordinal) {
            None => {
                return Err(TilerError::InconsistentBlocks(format!(
                    "ordinal {} outside a grid of {}",
                    block.ordinal,
                    self.seen.len()
                )))
            }
            Some(true) => return Err(TilerError::DuplicateOrdinal(block.ordinal)),
            Some(seen) => *seen = true,
        }
        if (row, col) != (block.row, block.col) {
            return Err(TilerError::InconsistentBlocks(format!(
                "ordinal {} claims cell ({}, {})",
                block.ordinal, block.row, block.col
            )));
        }
        let (x, y) = self.grid.window_origin(row, col);
        self.canvas
            .add(&block.pixels, x as isize + self.shift, y as isize + self.shift, &self.ramp, &self.ramp)
            .map_err(|e| TilerError::InconsistentBlocks(e.to_string()))
    }

    pub fn finish(self) -> Result<Image, TilerError> {
        let missing = self.seen.iter().filter(|s| !**s).count();
        if missing > 0 {
            return Err(TilerError::InconsistentBlocks(format!("{missing} blocks missing")));
        }
        self.canvas
            .finish()
            .map_err(|e| TilerError::InconsistentBlocks(e.to_string()))
    }
}

/// Feathers sorted, trimmed blocks back together and removes the expansion
/// margins, yielding an `original_w` x `original_h` image.
pub fn restore(
    blocks: &[Block],
    cfg: &PipelineConfig,
    original_w: usize,
    original_h: usize,
) -> Result<Image, TilerError> {
    let mut restorer = Restorer::new(cfg, original_w, original_h)?;
    if blocks.len() != restorer.seen.len() {
        return Err(TilerError::InconsistentBlocks(format!(
            "{} blocks for a grid of {}",
            blocks.len(),
            restorer.seen.len()
        )));
    }
    for (i, b) in blocks.iter().enumerate() {
        if b.ordinal != i {
            return Err(TilerError::InconsistentBlocks(format!(
                "position {i} holds ordinal {}",
                b.ordinal
            )));
        }
        restorer.add(b)?;
    }
    restorer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiler::shuffle;

    fn cfg() -> PipelineConfig {
        PipelineConfig {
            w_basic: 4,
            w_padding: 3,
            w_max: 25,
            trim: 1,
            smoothing: false,
            ..PipelineConfig::default()
        }
    }

    fn textured(w: usize, h: usize) -> Image<u8> {
        Image::from_fn(w, h, |x, y| [(x * 7 + y * 3) as u8, (x * y) as u8, (x ^ y) as u8]).unwrap()
    }

    #[test]
    fn expand_sizes() {
        let c = PipelineConfig::default();
        let img = Image::<u8>::new(3000, 3000).unwrap();
        let e = expand(&img, &c).unwrap();
        assert_eq!((e.width(), e.height()), (3040, 3040));
        let c0 = PipelineConfig { w_padding: 0, trim: 0, ..c };
        let img = Image::<u8>::new(64, 32).unwrap();
        let e = expand(&img, &c0).unwrap();
        assert_eq!((e.width(), e.height()), (64, 32));
    }

    #[test]
    fn expand_places_original_at_padding_offset() {
        let img = textured(10, 7);
        let e = expand(&img, &cfg()).unwrap();
        assert_eq!((e.width(), e.height()), (12 + 6, 8 + 6));
        let inner = crop(&e, Rect::new(3, 3, 10, 7)).unwrap();
        assert_eq!(inner, img);
    }

    #[test]
    fn expand_rejects_tiny_images() {
        let img = textured(3, 3);
        assert!(matches!(expand(&img, &cfg()), Err(TilerError::Raster(_))));
    }

    #[test]
    fn cut_windows() {
        let img = textured(10, 7);
        let c = cfg();
        let e = expand(&img, &c).unwrap();
        let blocks = cut(&e, &c).unwrap();
        assert_eq!(blocks.len(), 3 * 2);
        assert_eq!(blocks[4], BlockView { ordinal: 4, row: 1, col: 1, x0: 4, y0: 4 });
        let last = blocks.last().unwrap();
        assert_eq!(last.x0 + c.w_block(), e.width());
        assert_eq!(last.y0 + c.w_block(), e.height());
        let wrong = Image::<u8>::new(17, 14).unwrap();
        assert!(matches!(cut(&wrong, &c), Err(TilerError::GridMismatch { .. })));
    }

    #[test]
    fn cut_without_padding_partitions() {
        let c = PipelineConfig { w_basic: 5, w_padding: 0, trim: 0, w_max: 20, ..cfg() };
        let img = textured(15, 10);
        let blocks = cut(&img, &c).unwrap();
        let mut covered = vec![0u8; 150];
        for b in &blocks {
            for y in b.y0..b.y0 + 5 {
                for x in b.x0..b.x0 + 5 {
                    covered[y * 15 + x] += 1;
                }
            }
        }
        assert!(covered.iter().all(|&n| n == 1));
    }

    #[test]
    fn plan_fills_last_subimage_cyclically() {
        let c = cfg();
        // g = 25 / 10 = 2, four slots per sub-image
        let views: Vec<BlockView> = (0..6)
            .map(|i| BlockView { ordinal: i, row: 0, col: i, x0: 0, y0: 0 })
            .collect();
        let order = shuffle(views, 5);
        let plan = SubImagePlan::new(&order, &c).unwrap();
        assert_eq!(plan.n_subimg(), 2);
        assert_eq!(plan.side(), 20);
        let last = &plan.placement[1];
        assert_eq!(last.iter().filter(|s| s.filler).count(), 2);
        assert_eq!(last[2].block, order[0]);
        assert_eq!(last[3].block, order[1]);
        let real: Vec<usize> = plan
            .placement
            .iter()
            .flatten()
            .filter(|s| !s.filler)
            .map(|s| s.block.ordinal)
            .collect();
        assert_eq!(real, order.iter().map(|b| b.ordinal).collect::<Vec<_>>());
    }

    #[test]
    fn packing_2000_square() {
        let c = PipelineConfig::default();
        let img = Image::<u8>::new(2000, 2000).unwrap();
        let e = expand(&img, &c).unwrap();
        let blocks = cut(&e, &c).unwrap();
        assert_eq!(blocks.len(), 15625);
        let plan = SubImagePlan::new(&shuffle(blocks, 1), &c).unwrap();
        assert_eq!(plan.n_subimg(), 40);
        assert_eq!(plan.side(), 960);
        let last = &plan.placement[39];
        assert_eq!(last.iter().filter(|s| !s.filler).count(), 25);
        assert_eq!(last.iter().filter(|s| s.filler).count(), 375);
    }

    #[test]
    fn exact_fit_has_no_fillers() {
        let c = cfg();
        let img = textured(16, 4);
        let e = expand(&img, &c).unwrap();
        let blocks = cut(&e, &c).unwrap();
        assert_eq!(blocks.len(), 4);
        let plan = SubImagePlan::new(&blocks, &c).unwrap();
        assert!(plan.placement.iter().flatten().all(|s| !s.filler));
    }

    #[test]
    fn concatenate_rejects_oversized_blocks() {
        let c = PipelineConfig { w_max: 9, ..cfg() };
        let img = textured(10, 7);
        let e = expand(&img, &cfg()).unwrap();
        let blocks = cut(&e, &cfg()).unwrap();
        assert!(matches!(concatenate(&blocks, &e, &c), Err(TilerError::Config(_))));
    }

    #[test]
    fn recut_inverts_concatenate() {
        let c = cfg();
        let img = textured(21, 13);
        let e = expand(&img, &c).unwrap();
        let blocks = shuffle(cut(&e, &c).unwrap(), 9);
        let batch = concatenate(&blocks, &e, &c).unwrap();
        let back = sort_blocks(recut(&batch, &c).unwrap()).unwrap();
        assert_eq!(back.len(), blocks.len());
        for b in &back {
            let (x, y) = (b.col * c.w_basic + c.trim, b.row * c.w_basic + c.trim);
            let want = crop(&e, Rect::new(x, y, c.trimmed_side(), c.trimmed_side())).unwrap();
            assert_eq!(b.pixels, want.to_f32());
        }
    }

    #[test]
    fn recut_trim_zero_keeps_full_blocks() {
        let c = PipelineConfig { trim: 0, ..cfg() };
        let img = textured(8, 8);
        let e = expand(&img, &c).unwrap();
        let batch = concatenate(&cut(&e, &c).unwrap(), &e, &c).unwrap();
        let back = recut(&batch, &c).unwrap();
        assert!(back.iter().all(|b| b.pixels.width() == c.w_block()));
    }

    #[test]
    fn recut_checks_subimage_size() {
        let c = cfg();
        let img = textured(8, 8);
        let e = expand(&img, &c).unwrap();
        let mut batch = concatenate(&cut(&e, &c).unwrap(), &e, &c).unwrap();
        batch.subimages[0] = Image::new(5, 5).unwrap();
        assert!(matches!(recut(&batch, &c), Err(TilerError::SubImageSize { index: 0, .. })));
    }

    #[test]
    fn sort_orders_and_detects_duplicates() {
        let mk = |ordinal| Block {
            ordinal,
            row: 0,
            col: ordinal,
            filler: false,
            pixels: Image::new(1, 1).unwrap(),
        };
        let sorted = sort_blocks((0..5).rev().map(mk).collect()).unwrap();
        assert_eq!(sorted.iter().map(|b| b.ordinal).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        assert_eq!(sort_blocks(sorted.clone()).unwrap(), sorted);
        let dup = vec![mk(1), mk(0), mk(1)];
        assert!(matches!(sort_blocks(dup), Err(TilerError::DuplicateOrdinal(1))));
    }

    #[test]
    fn sort_15625_shuffled() {
        let mk = |ordinal| Block {
            ordinal,
            row: 0,
            col: 0,
            filler: false,
            pixels: Image::new(1, 1).unwrap(),
        };
        let blocks = shuffle((0..15625).map(mk).collect::<Vec<_>>(), 77);
        let sorted = sort_blocks(blocks).unwrap();
        assert!(sorted.iter().enumerate().all(|(i, b)| b.ordinal == i));
    }

    #[test]
    fn restore_identity_blocks() {
        let c = cfg();
        let img = textured(21, 13);
        let e = expand(&img, &c).unwrap();
        let batch = concatenate(&shuffle(cut(&e, &c).unwrap(), 3), &e, &c).unwrap();
        let blocks = sort_blocks(recut(&batch, &c).unwrap()).unwrap();
        let out = restore(&blocks, &c, 21, 13).unwrap();
        assert_eq!(out, img.to_f32());
    }

    #[test]
    fn restore_rejects_bad_sets() {
        let c = cfg();
        let img = textured(8, 8);
        let e = expand(&img, &c).unwrap();
        let batch = concatenate(&cut(&e, &c).unwrap(), &e, &c).unwrap();
        let mut blocks = sort_blocks(recut(&batch, &c).unwrap()).unwrap();
        assert!(restore(&blocks[1..], &c, 8, 8).is_err());
        blocks.swap(0, 1);
        assert!(restore(&blocks, &c, 8, 8).is_err());
        blocks.swap(0, 1);
        blocks[2].pixels = Image::new(3, 3).unwrap();
        assert!(restore(&blocks, &c, 8, 8).is_err());
    }

    #[test]
    fn restorer_accepts_any_order_once() {
        let c = cfg();
        let img = textured(21, 13);
        let e = expand(&img, &c).unwrap();
        let batch = concatenate(&shuffle(cut(&e, &c).unwrap(), 5), &e, &c).unwrap();
        let blocks = recut(&batch, &c).unwrap();

        let mut r = Restorer::new(&c, 21, 13).unwrap();
        for b in &blocks {
            r.add(b).unwrap();
        }
        assert!(matches!(r.add(&blocks[0]), Err(TilerError::DuplicateOrdinal(_))));
        assert_eq!(r.finish().unwrap(), img.to_f32());

        let mut partial = Restorer::new(&c, 21, 13).unwrap();
        for b in &blocks[1..] {
            partial.add(b).unwrap();
        }
        assert!(matches!(partial.finish(), Err(TilerError::InconsistentBlocks(_))));
    }
}
