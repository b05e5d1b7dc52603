package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void findX() {
        Calc calc = new Calc();
        assertNull(calc.find("x"));
    }
}
