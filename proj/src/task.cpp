namespace rollopt {}
