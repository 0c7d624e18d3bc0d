#include <math.h>
#include <stdio.h>
#include "shapelab.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        ShapelabStatus st_ = (call);                                       \
        if (st_ != SHAPELAB_STATUS_OK) {                                   \
            fprintf(stderr, "%s: %d %s\n", #call, st_, shapelab_last_error()); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    ShapelabMesh *mesh = NULL;
    ShapelabSpectrum *spec = NULL;
    double mu2 = 0.0, exact = 0.0;
    size_t mult = 0;
    CHECK(shapelab_mesh_build("{\"kind\": \"rectangle\", \"width\": 1.0, \"height\": 1.0}", 0.1, &mesh));
    CHECK(shapelab_solve(mesh, "{\"count\": 6}", &spec));
    CHECK(shapelab_spectrum_mu2(spec, &mu2, &mult));
    exact = M_PI * M_PI;
    printf("mu2 %.6f multiplicity %zu\n", mu2, mult);
    if (fabs(mu2 - exact) > 0.02 * exact || mult != 2) return 2;
    if (shapelab_mesh_build("not json", 0.1, &mesh) != SHAPELAB_STATUS_CONFIG) return 3;
    shapelab_spectrum_free(spec);
    shapelab_mesh_free(mesh);
    return 0;
}
