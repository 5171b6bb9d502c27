#include <stdio.h>
#include "lesionkit.h"

static int failures = 0;

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s\n", #cond); failures++; } } while (0)

int main(void) {
    uint8_t px[16 * 16 * 3];
    for (int y = 0; y < 16; y++)
        for (int x = 0; x < 16; x++)
            for (int c = 0; c < 3; c++)
                px[(y * 16 + x) * 3 + c] = x < 8 ? 255 : 0;
    uint64_t hash = 0;
    CHECK(lk_dhash_rgb8(px, 16, 16, &hash) == LK_STATUS_OK);
    CHECK(hash == 0x1818181818181818ULL);
    CHECK(lk_hamming(hash, 0) == 16);

    LkScheduler *s = NULL;
    CHECK(lk_scheduler_new(1e-3, 1e-3, 3, 0.0, &s) == LK_STATUS_OK);
    bool reduced = false;
    double losses[] = {1.0, 1.0, 1.0, 1.0};
    for (int i = 0; i < 4; i++) lk_scheduler_step(s, losses[i], &reduced);
    CHECK(reduced);
    CHECK(lk_scheduler_lr(s) == 1e-3 * 1e-3);
    lk_scheduler_free(s);

    LkStopper *st = lk_stopper_new(7);
    CHECK(lk_stopper_step(st, 1.5, NULL) == LK_STATUS_INVALID_METRIC);
    CHECK(lk_last_error() != NULL);
    lk_stopper_free(st);

    LkConfusion *cm = lk_confusion_new(2);
    lk_confusion_add(cm, 0, 0);
    lk_confusion_add(cm, 1, 0);
    LkMetrics m;
    CHECK(lk_confusion_metrics(cm, &m) == LK_STATUS_OK);
    CHECK(m.total == 2 && m.accuracy == 0.5);
    lk_confusion_free(cm);

    if (failures == 0) printf("ok\n");
    return failures != 0;
}
