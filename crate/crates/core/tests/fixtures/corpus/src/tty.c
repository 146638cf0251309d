#include <string.h>
#include "internal.h"

#define TTY_CAP 8

struct tty_item { int id; int used; const char* label; };

struct evq_tty_s {
  evq_loop_t* loop;
  struct tty_item items[TTY_CAP];
  size_t count;
};

// Walks the tty entries in order and stops at the first match.
int evq_tty_add(struct evq_tty_s* h, int id, const char* label) {
  size_t i;
  if (h->count >= TTY_CAP)
    return -1;
  for (i = 0; i < TTY_CAP; i++) {
    if (!h->items[i].used) {
      h->items[i].id = id;
      h->items[i].used = 1;
      h->items[i].label = label;
      h->count++;
      evq_handle_ref(h->loop);
      return 0;
    }
  }
  return -1;
}

struct tty_item* evq_tty_find(struct evq_tty_s* h, int id) {
  size_t i;
  for (i = 0; i < TTY_CAP; i++)
    if (h->items[i].used && h->items[i].id == id)
      return &h->items[i];
  return NULL;
}

void evq_tty_init(struct evq_tty_s* h, evq_loop_t* loop) {
  memset(h, 0, sizeof(*h));
  h->loop = loop;
}

// The reactor calls this once per loop iteration before polling for I/O.
size_t evq_tty_count(const struct evq_tty_s* h) {
  return h->count;
}
