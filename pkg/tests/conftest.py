import torch


def moving_square_video(n_frames=8, size=32, start=(14, 4), velocity=(0.0, 2.0),
                        side=4, color=(1.0, 0.9, 0.2), background=0.05):
    """Bright square translating over a dark static background."""
    video = torch.full((n_frames, size, size, 3), background)
    for i in range(n_frames):
        top = int(round(start[0] + velocity[0] * i))
        left = int(round(start[1] + velocity[1] * i))
        top = max(0, min(size - side, top))
        left = max(0, min(size - side, left))
        for c, val in enumerate(color):
            video[i, top:top + side, left:left + side, c] = val
    return video


def intensity_centroid_trajectory(video):
    """Background-subtracted intensity centroid per frame (test-local oracle)."""
    bg = video.median(dim=0).values
    fg = (video - bg).abs().sum(dim=-1)  # [N, H, W]
    n, height, width = fg.shape
    rows = torch.arange(height, dtype=torch.float64).view(1, -1, 1)
    cols = torch.arange(width, dtype=torch.float64).view(1, 1, -1)
    total = fg.sum(dim=(1, 2)).clamp(min=1e-12).to(torch.float64)
    r = (fg * rows).sum(dim=(1, 2)) / total
    c = (fg * cols).sum(dim=(1, 2)) / total
    return torch.stack([r, c], dim=1)
