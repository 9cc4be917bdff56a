//! Copper-tone lookup table for colour-mapped sonar renderings.

use crate::imaging::Raster;

pub const COPPER: [[u8; 3]; 256] = [
    [0, 0, 0],
    [1, 1, 0],
    [2, 2, 1],
    [4, 2, 1],
    [5, 3, 2],
    [6, 4, 2],
    [8, 5, 3],
    [9, 5, 3],
    [10, 6, 4],
    [11, 7, 4],
    [12, 8, 5],
    [14, 9, 5],
    [15, 9, 6],
    [16, 10, 6],
    [18, 11, 7],
    [19, 12, 7],
    [20, 12, 8],
    [21, 13, 8],
    [22, 14, 9],
    [24, 15, 9],
    [25, 16, 10],
    [26, 16, 10],
    [28, 17, 11],
    [29, 18, 11],
    [30, 19, 12],
    [31, 20, 12],
    [32, 20, 13],
    [34, 21, 13],
    [35, 22, 14],
    [36, 23, 14],
    [38, 23, 15],
    [39, 24, 15],
    [40, 25, 16],
    [41, 26, 16],
    [42, 27, 17],
    [44, 27, 17],
    [45, 28, 18],
    [46, 29, 18],
    [48, 30, 19],
    [49, 30, 19],
    [50, 31, 20],
    [51, 32, 20],
    [52, 33, 21],
    [54, 34, 21],
    [55, 34, 22],
    [56, 35, 22],
    [58, 36, 23],
    [59, 37, 23],
    [60, 37, 24],
    [61, 38, 24],
    [62, 39, 25],
    [64, 40, 25],
    [65, 41, 26],
    [66, 41, 26],
    [68, 42, 27],
    [69, 43, 27],
    [70, 44, 28],
    [71, 45, 28],
    [72, 45, 29],
    [74, 46, 29],
    [75, 47, 30],
    [76, 48, 30],
    [78, 48, 31],
    [79, 49, 31],
    [80, 50, 32],
    [81, 51, 32],
    [82, 52, 33],
    [84, 52, 33],
    [85, 53, 34],
    [86, 54, 34],
    [88, 55, 35],
    [89, 55, 35],
    [90, 56, 36],
    [91, 57, 36],
    [93, 58, 37],
    [94, 59, 37],
    [95, 59, 38],
    [96, 60, 38],
    [98, 61, 39],
    [99, 62, 39],
    [100, 62, 40],
    [101, 63, 40],
    [102, 64, 41],
    [104, 65, 41],
    [105, 66, 42],
    [106, 66, 42],
    [108, 67, 43],
    [109, 68, 43],
    [110, 69, 44],
    [111, 70, 44],
    [113, 70, 45],
    [114, 71, 45],
    [115, 72, 46],
    [116, 73, 46],
    [118, 73, 47],
    [119, 74, 47],
    [120, 75, 48],
    [121, 76, 48],
    [122, 77, 49],
    [124, 77, 49],
    [125, 78, 50],
    [126, 79, 50],
    [128, 80, 51],
    [129, 80, 51],
    [130, 81, 52],
    [131, 82, 52],
    [132, 83, 53],
    [134, 84, 53],
    [135, 84, 54],
    [136, 85, 54],
    [138, 86, 55],
    [139, 87, 55],
    [140, 87, 56],
    [141, 88, 56],
    [142, 89, 57],
    [144, 90, 57],
    [145, 91, 58],
    [146, 91, 58],
    [148, 92, 59],
    [149, 93, 59],
    [150, 94, 60],
    [151, 95, 60],
    [152, 95, 61],
    [154, 96, 61],
    [155, 97, 62],
    [156, 98, 62],
    [158, 98, 63],
    [159, 99, 63],
    [160, 100, 64],
    [161, 101, 64],
    [162, 102, 65],
    [164, 102, 65],
    [165, 103, 66],
    [166, 104, 66],
    [168, 105, 67],
    [169, 105, 67],
    [170, 106, 68],
    [171, 107, 68],
    [172, 108, 69],
    [174, 109, 69],
    [175, 109, 70],
    [176, 110, 70],
    [178, 111, 71],
    [179, 112, 71],
    [180, 112, 72],
    [181, 113, 72],
    [182, 114, 73],
    [184, 115, 73],
    [185, 116, 74],
    [186, 116, 74],
    [188, 117, 75],
    [189, 118, 75],
    [190, 119, 76],
    [191, 120, 76],
    [192, 120, 77],
    [194, 121, 77],
    [195, 122, 78],
    [196, 123, 78],
    [198, 123, 79],
    [199, 124, 79],
    [200, 125, 80],
    [201, 126, 80],
    [202, 127, 81],
    [204, 127, 81],
    [205, 128, 82],
    [206, 129, 82],
    [208, 130, 83],
    [209, 130, 83],
    [210, 131, 84],
    [211, 132, 84],
    [212, 133, 85],
    [214, 134, 85],
    [215, 134, 86],
    [216, 135, 86],
    [218, 136, 87],
    [219, 137, 87],
    [220, 137, 88],
    [221, 138, 88],
    [222, 139, 89],
    [224, 140, 89],
    [225, 141, 90],
    [226, 141, 90],
    [228, 142, 91],
    [229, 143, 91],
    [230, 144, 92],
    [231, 145, 92],
    [232, 145, 93],
    [234, 146, 93],
    [235, 147, 94],
    [236, 148, 94],
    [238, 148, 95],
    [239, 149, 95],
    [240, 150, 96],
    [241, 151, 96],
    [242, 152, 97],
    [244, 152, 97],
    [245, 153, 98],
    [246, 154, 98],
    [248, 155, 99],
    [249, 155, 99],
    [250, 156, 100],
    [251, 157, 100],
    [252, 158, 100],
    [254, 159, 101],
    [255, 159, 101],
    [255, 160, 102],
    [255, 161, 102],
    [255, 162, 103],
    [255, 162, 103],
    [255, 163, 104],
    [255, 164, 104],
    [255, 165, 105],
    [255, 166, 105],
    [255, 166, 106],
    [255, 167, 106],
    [255, 168, 107],
    [255, 169, 107],
    [255, 170, 108],
    [255, 170, 108],
    [255, 171, 109],
    [255, 172, 109],
    [255, 173, 110],
    [255, 173, 110],
    [255, 174, 111],
    [255, 175, 111],
    [255, 176, 112],
    [255, 177, 112],
    [255, 177, 113],
    [255, 178, 113],
    [255, 179, 114],
    [255, 180, 114],
    [255, 180, 115],
    [255, 181, 115],
    [255, 182, 116],
    [255, 183, 116],
    [255, 184, 117],
    [255, 184, 117],
    [255, 185, 118],
    [255, 186, 118],
    [255, 187, 119],
    [255, 187, 119],
    [255, 188, 120],
    [255, 189, 120],
    [255, 190, 121],
    [255, 191, 121],
    [255, 191, 122],
    [255, 192, 122],
    [255, 193, 123],
    [255, 194, 123],
    [255, 195, 124],
    [255, 195, 124],
    [255, 196, 125],
    [255, 197, 125],
    [255, 198, 126],
    [255, 198, 126],
    [255, 199, 127],
];

/// Maps a grayscale raster through [`COPPER`] into a 3-channel raster.
pub fn apply_colormap(gray: &Raster) -> Raster {
    let g = gray.to_gray();
    let data = g
        .data()
        .iter()
        .flat_map(|&v| {
            let idx = (v.clamp(0.0, 1.0) * 255.0).round() as usize;
            COPPER[idx].map(|c| c as f64 / 255.0)
        })
        .collect();
    Raster::new(g.height(), g.width(), 3, data).expect("colormap preserves dimensions")
}
