#include <stdio.h>
#include <stdlib.h>

#include "bnr.h"

int main(void) {
    BnrSimOptions sim = bnr_sim_options_default();
    sim.nodes = 5;
    sim.n = 15;
    sim.n_pred = 3;
    sim.seed = 4;
    BnrDataset *train = NULL, *test = NULL;
    if (bnr_dataset_simulate(&sim, &train, &test) != BNR_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", bnr_last_error());
        return 1;
    }
    BnrFitOptions opts = bnr_fit_options_default();
    opts.rank = 2;
    opts.iterations = 200;
    opts.burn_in = 100;
    opts.thin = 5;
    BnrFit *fit = NULL;
    if (bnr_fit(train, &opts, &fit) != BNR_STATUS_OK) {
        fprintf(stderr, "fit: %s\n", bnr_last_error());
        return 1;
    }
    double probs[5], point[3], low[3], high[3];
    if (bnr_fit_node_probabilities(fit, probs, 5) != BNR_STATUS_OK) return 1;
    if (bnr_fit_predict(fit, test, 1, point, low, high, 3) != BNR_STATUS_OK) return 1;
    if (bnr_fit_node_probabilities(fit, probs, 2) != BNR_STATUS_BUFFER_TOO_SMALL) return 1;
    printf("draws %zu first %.6f interval %.6f %.6f\n", bnr_fit_draws(fit), point[0], low[0], high[0]);
    bnr_fit_free(fit);
    bnr_dataset_free(train);
    bnr_dataset_free(test);
    return 0;
}
